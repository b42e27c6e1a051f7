#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "innoprot/vector_ops.hpp"

namespace innoprot {

enum class ObjectiveKind { logistic, quadratic };

struct LogisticSample {
    Vector features;
    double label = 1.0;  // exactly +1 or -1
};

/// f_i(x) = ½ (x - offset)ᵀ matrix (x - offset), matrix row-major m x m.
struct QuadraticTerm {
    Vector matrix;
    Vector offset;

    friend bool operator==(const QuadraticTerm&, const QuadraticTerm&) = default;
};

/// Per-node local costs of a consensus problem Σ_i f_i(x).
///
/// Logistic nodes use f_i(x) = σ/(2n)‖x‖² + Σ_j ln(1 + exp(-ℓ_ij a_ijᵀx)).
/// Immutable once built; all evaluations are const and thread-safe.
class ObjectiveSpec {
public:
    static ObjectiveSpec logistic(std::size_t dim, double sigma,
                                  std::vector<std::vector<LogisticSample>> per_node);
    static ObjectiveSpec quadratic(std::size_t dim, std::vector<QuadraticTerm> per_node);

    ObjectiveKind kind() const { return kind_; }
    std::size_t nodes() const { return nodes_; }
    std::size_t dim() const { return dim_; }
    double sigma() const { return sigma_; }
    const std::vector<std::vector<LogisticSample>>& samples() const { return samples_; }
    const std::vector<QuadraticTerm>& quadratic_terms() const { return quad_; }
    std::size_t total_samples() const;

    double local_value(std::size_t node, std::span<const double> x) const;
    void local_gradient(std::size_t node, std::span<const double> x, std::span<double> out) const;
    Vector local_gradient(std::size_t node, std::span<const double> x) const;

    double value(std::span<const double> x) const;
    Vector gradient(std::span<const double> x) const;

    /// Upper bound on the Lipschitz constant of the global gradient.
    double smoothness_bound() const;

    friend bool operator==(const ObjectiveSpec&, const ObjectiveSpec&);

private:
    ObjectiveKind kind_ = ObjectiveKind::logistic;
    std::size_t nodes_ = 0;
    std::size_t dim_ = 0;
    double sigma_ = 0.0;
    std::vector<std::vector<LogisticSample>> samples_;
    std::vector<QuadraticTerm> quad_;
};

/// Standard-normal features, labels sign(aᵀw⋆) from a planted w⋆ with each
/// label flipped with probability 0.1.
ObjectiveSpec synth_logistic(std::size_t nodes, std::size_t dim, std::size_t samples_per_node,
                             double sigma, std::uint64_t seed);

/// Centralized minimizer of Σ_i f_i: closed form for quadratics, gradient
/// descent with step 1/L for logistic. Throws std::runtime_error when the
/// gradient norm has not reached tol within max_iters.
Vector global_minimizer(const ObjectiveSpec& spec, double tol,
                        std::optional<Vector> start = std::nullopt,
                        std::size_t max_iters = 5'000'000);

/// Plain-text dump that reloads bit-exactly (hex floats).
void save_objective(std::ostream& os, const ObjectiveSpec& spec);
ObjectiveSpec load_objective(std::istream& is);

}  // namespace innoprot
