#include "freesub/model.hpp"

#include <cmath>

#include "freesub/errors.hpp"

namespace freesub {

namespace {

void require_nonnegative_support(const Measure& m, const char* what) {
    if (m.support_lo() < 0.0) throw DomainError(std::string(what) + " must be supported on [0, inf)");
}

void require_sigma(double sigma) {
    if (!std::isfinite(sigma) || sigma <= 0.0) throw DomainError("sigma must be positive");
}

void require_ratio(double c) {
    if (!std::isfinite(c) || c <= 0.0 || c > 1.0) throw DomainError("c must lie in (0, 1]");
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::Additive: return "additive";
        case ModelKind::Multiplicative: return "multiplicative";
        case ModelKind::InfoPlusNoise: return "info_plus_noise";
        case ModelKind::IsotropicAdditive: return "isotropic_additive";
        case ModelKind::IsotropicMultiplicative: return "isotropic_multiplicative";
    }
    return "unknown";
}

ModelKind model_kind_from_string(std::string_view s) {
    for (auto k : {ModelKind::Additive, ModelKind::Multiplicative, ModelKind::InfoPlusNoise,
                   ModelKind::IsotropicAdditive, ModelKind::IsotropicMultiplicative}) {
        if (to_string(k) == s) return k;
    }
    throw DomainError("unknown model kind: " + std::string(s));
}

DeformedModel DeformedModel::additive(Measure nu, double sigma) {
    require_sigma(sigma);
    return {ModelKind::Additive, std::move(nu), std::nullopt, sigma, 0.0};
}

DeformedModel DeformedModel::multiplicative(Measure nu, double c) {
    require_ratio(c);
    require_nonnegative_support(nu, "nu");
    return {ModelKind::Multiplicative, std::move(nu), std::nullopt, 0.0, c};
}

DeformedModel DeformedModel::info_plus_noise(Measure nu, double c, double sigma) {
    require_ratio(c);
    require_sigma(sigma);
    require_nonnegative_support(nu, "nu");
    return {ModelKind::InfoPlusNoise, std::move(nu), std::nullopt, sigma, c};
}

DeformedModel DeformedModel::isotropic_additive(Measure mu, Measure nu) {
    return {ModelKind::IsotropicAdditive, std::move(nu), std::move(mu), 0.0, 0.0};
}

DeformedModel DeformedModel::isotropic_multiplicative(Measure mu, Measure nu) {
    require_nonnegative_support(mu, "mu");
    require_nonnegative_support(nu, "nu");
    if (mu.atom_mass(0.0) == 1.0 || nu.atom_mass(0.0) == 1.0)
        throw DomainError("multiplicative convolution with the point mass at zero");
    return {ModelKind::IsotropicMultiplicative, std::move(nu), std::move(mu), 0.0, 0.0};
}

DeformedModel DeformedModel::with_nu(Measure new_nu) const {
    DeformedModel m = *this;
    m.nu = std::move(new_nu);
    return m;
}

}  // namespace freesub
