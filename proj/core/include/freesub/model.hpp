#pragma once

#include <optional>
#include <string_view>

#include "freesub/measure.hpp"

namespace freesub {

enum class ModelKind { Additive, Multiplicative, InfoPlusNoise, IsotropicAdditive, IsotropicMultiplicative };

[[nodiscard]] std::string_view to_string(ModelKind k) noexcept;
/// Inverse of to_string; throws DomainError on unknown names.
[[nodiscard]] ModelKind model_kind_from_string(std::string_view s);

/// A deformed random matrix model.
///
/// Additive:                 W + A,                          mu = semicircle(sigma)
/// Multiplicative:           A^{1/2} S A^{1/2},              mu = Marchenko-Pastur(c)
/// InfoPlusNoise:            (sigma X/sqrt(p) + A)(...)^*,   nu = law of A A^*
/// IsotropicAdditive:        A + U B U^*,                    nu = law of A, mu = law of B
/// IsotropicMultiplicative:  A^{1/2} U B U^* A^{1/2}
struct DeformedModel {
    ModelKind kind;
    Measure nu;
    std::optional<Measure> mu;
    double sigma = 0.0;
    double c = 0.0;

    static DeformedModel additive(Measure nu, double sigma);
    static DeformedModel multiplicative(Measure nu, double c);
    static DeformedModel info_plus_noise(Measure nu, double c, double sigma);
    static DeformedModel isotropic_additive(Measure mu, Measure nu);
    static DeformedModel isotropic_multiplicative(Measure mu, Measure nu);

    [[nodiscard]] bool isotropic() const noexcept {
        return kind == ModelKind::IsotropicAdditive || kind == ModelKind::IsotropicMultiplicative;
    }
    /// Same model with a different nu.
    [[nodiscard]] DeformedModel with_nu(Measure new_nu) const;
};

}  // namespace freesub
