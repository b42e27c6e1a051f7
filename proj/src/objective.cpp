#include "innoprot/objective.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace innoprot {

namespace {

// exp(-u) / (1 + exp(-u)) without overflow for large |u|.
double logistic_weight(double u) {
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(u));
}

// ln(1 + exp(-u)), stable on both tails.
double softplus_neg(double u) {
    if (u > 0.0) return std::log1p(std::exp(-u));
    return -u + std::log1p(std::exp(u));
}

// In-place Cholesky; returns false if the matrix is not positive definite.
bool cholesky(std::vector<double>& a, std::size_t m) {
    for (std::size_t j = 0; j < m; ++j) {
        double d = a[j * m + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * m + k] * a[j * m + k];
        if (!(d > 0.0)) return false;
        a[j * m + j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < m; ++i) {
            double s = a[i * m + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * m + k] * a[j * m + k];
            a[i * m + j] = s / a[j * m + j];
        }
    }
    return true;
}

Vector cholesky_solve(const std::vector<double>& l, std::size_t m, Vector rhs) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < i; ++k) rhs[i] -= l[i * m + k] * rhs[k];
        rhs[i] /= l[i * m + i];
    }
    for (std::size_t i = m; i-- > 0;) {
        for (std::size_t k = i + 1; k < m; ++k) rhs[i] -= l[k * m + i] * rhs[k];
        rhs[i] /= l[i * m + i];
    }
    return rhs;
}

}  // namespace

ObjectiveSpec ObjectiveSpec::logistic(std::size_t dim, double sigma,
                                      std::vector<std::vector<LogisticSample>> per_node) {
    if (!(sigma > 0.0)) throw std::invalid_argument("logistic regularizer sigma must be > 0");
    if (dim == 0 || per_node.empty()) throw std::invalid_argument("empty logistic objective");
    for (const auto& node : per_node) {
        for (const auto& s : node) {
            if (s.features.size() != dim) throw std::invalid_argument("feature dimension mismatch");
            if (s.label != 1.0 && s.label != -1.0) throw std::invalid_argument("labels must be +1 or -1");
        }
    }
    ObjectiveSpec spec;
    spec.kind_ = ObjectiveKind::logistic;
    spec.nodes_ = per_node.size();
    spec.dim_ = dim;
    spec.sigma_ = sigma;
    spec.samples_ = std::move(per_node);
    return spec;
}

ObjectiveSpec ObjectiveSpec::quadratic(std::size_t dim, std::vector<QuadraticTerm> per_node) {
    if (dim == 0 || per_node.empty()) throw std::invalid_argument("empty quadratic objective");
    for (const auto& q : per_node) {
        if (q.matrix.size() != dim * dim || q.offset.size() != dim) {
            throw std::invalid_argument("quadratic term dimension mismatch");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (q.matrix[i * dim + j] != q.matrix[j * dim + i]) {
                    throw std::invalid_argument("quadratic matrix must be symmetric");
                }
            }
        }
        auto l = q.matrix;
        if (!cholesky(l, dim)) throw std::invalid_argument("quadratic matrix must be positive definite");
    }
    ObjectiveSpec spec;
    spec.kind_ = ObjectiveKind::quadratic;
    spec.nodes_ = per_node.size();
    spec.dim_ = dim;
    spec.quad_ = std::move(per_node);
    return spec;
}

std::size_t ObjectiveSpec::total_samples() const {
    std::size_t total = 0;
    for (const auto& node : samples_) total += node.size();
    return total;
}

double ObjectiveSpec::local_value(std::size_t node, std::span<const double> x) const {
    if (kind_ == ObjectiveKind::quadratic) {
        const auto& q = quad_.at(node);
        const Vector d = sub(x, q.offset);
        double v = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            for (std::size_t j = 0; j < dim_; ++j) v += d[i] * q.matrix[i * dim_ + j] * d[j];
        }
        return 0.5 * v;
    }
    double v = sigma_ / (2.0 * static_cast<double>(nodes_)) * norm2(x);
    for (const auto& s : samples_.at(node)) v += softplus_neg(s.label * dot(s.features, x));
    return v;
}

void ObjectiveSpec::local_gradient(std::size_t node, std::span<const double> x,
                                   std::span<double> out) const {
    if (kind_ == ObjectiveKind::quadratic) {
        const auto& q = quad_.at(node);
        for (std::size_t i = 0; i < dim_; ++i) {
            double g = 0.0;
            for (std::size_t j = 0; j < dim_; ++j) g += q.matrix[i * dim_ + j] * (x[j] - q.offset[j]);
            out[i] = g;
        }
        return;
    }
    const double reg = sigma_ / static_cast<double>(nodes_);
    for (std::size_t k = 0; k < dim_; ++k) out[k] = reg * x[k];
    for (const auto& s : samples_.at(node)) {
        const double w = logistic_weight(s.label * dot(s.features, x));
        for (std::size_t k = 0; k < dim_; ++k) out[k] -= s.label * s.features[k] * w;
    }
}

Vector ObjectiveSpec::local_gradient(std::size_t node, std::span<const double> x) const {
    Vector g(dim_);
    local_gradient(node, x, g);
    return g;
}

double ObjectiveSpec::value(std::span<const double> x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < nodes_; ++i) v += local_value(i, x);
    return v;
}

Vector ObjectiveSpec::gradient(std::span<const double> x) const {
    Vector total(dim_, 0.0), g(dim_);
    for (std::size_t i = 0; i < nodes_; ++i) {
        local_gradient(i, x, g);
        for (std::size_t k = 0; k < dim_; ++k) total[k] += g[k];
    }
    return total;
}

double ObjectiveSpec::smoothness_bound() const {
    double l = 0.0;
    if (kind_ == ObjectiveKind::quadratic) {
        // Frobenius norm bounds the spectral norm.
        for (const auto& q : quad_) l += std::sqrt(norm2(q.matrix));
        return l;
    }
    l = sigma_;
    for (const auto& node : samples_) {
        for (const auto& s : node) l += 0.25 * norm2(s.features);
    }
    return l;
}

bool operator==(const ObjectiveSpec& a, const ObjectiveSpec& b) {
    if (a.kind_ != b.kind_ || a.nodes_ != b.nodes_ || a.dim_ != b.dim_ || a.sigma_ != b.sigma_) return false;
    if (a.samples_.size() != b.samples_.size() || a.quad_.size() != b.quad_.size()) return false;
    for (std::size_t i = 0; i < a.samples_.size(); ++i) {
        if (a.samples_[i].size() != b.samples_[i].size()) return false;
        for (std::size_t j = 0; j < a.samples_[i].size(); ++j) {
            if (a.samples_[i][j].features != b.samples_[i][j].features ||
                a.samples_[i][j].label != b.samples_[i][j].label) {
                return false;
            }
        }
    }
    for (std::size_t i = 0; i < a.quad_.size(); ++i) {
        if (a.quad_[i].matrix != b.quad_[i].matrix || a.quad_[i].offset != b.quad_[i].offset) return false;
    }
    return true;
}

ObjectiveSpec synth_logistic(std::size_t nodes, std::size_t dim, std::size_t samples_per_node,
                             double sigma, std::uint64_t seed) {
    if (nodes == 0 || dim == 0 || samples_per_node == 0) {
        throw std::invalid_argument("synth_logistic needs positive counts");
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("logistic regularizer sigma must be > 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution flip(0.1);

    Vector planted(dim);
    for (auto& v : planted) v = normal(rng);

    std::vector<std::vector<LogisticSample>> per_node(nodes);
    for (auto& node : per_node) {
        node.resize(samples_per_node);
        for (auto& s : node) {
            s.features.resize(dim);
            for (auto& f : s.features) f = normal(rng);
            s.label = dot(s.features, planted) >= 0.0 ? 1.0 : -1.0;
            if (flip(rng)) s.label = -s.label;
        }
    }
    return ObjectiveSpec::logistic(dim, sigma, std::move(per_node));
}

Vector global_minimizer(const ObjectiveSpec& spec, double tol, std::optional<Vector> start,
                        std::size_t max_iters) {
    const std::size_t m = spec.dim();
    if (spec.kind() == ObjectiveKind::quadratic) {
        std::vector<double> a(m * m, 0.0);
        Vector rhs(m, 0.0);
        for (const auto& q : spec.quadratic_terms()) {
            for (std::size_t i = 0; i < m * m; ++i) a[i] += q.matrix[i];
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) rhs[i] += q.matrix[i * m + j] * q.offset[j];
            }
        }
        cholesky(a, m);
        return cholesky_solve(a, m, std::move(rhs));
    }

    Vector x = start.value_or(Vector(m, 0.0));
    if (x.size() != m) throw std::invalid_argument("warm start has wrong dimension");
    const double step = 1.0 / spec.smoothness_bound();
    for (std::size_t it = 0; it < max_iters; ++it) {
        const Vector g = spec.gradient(x);
        if (norm(g) <= tol) return x;
        for (std::size_t k = 0; k < m; ++k) x[k] -= step * g[k];
    }
    throw std::runtime_error(fmt::format("global_minimizer: gradient norm above {} after {} iterations",
                                         tol, max_iters));
}

void save_objective(std::ostream& os, const ObjectiveSpec& spec) {
    const std::size_t m = spec.dim();
    if (spec.kind() == ObjectiveKind::logistic) {
        os << fmt::format("logistic {} {} {:a}\n", spec.nodes(), m, spec.sigma());
        for (std::size_t i = 0; i < spec.nodes(); ++i) {
            os << spec.samples()[i].size() << '\n';
            for (const auto& s : spec.samples()[i]) {
                os << (s.label > 0 ? "+1" : "-1");
                for (double f : s.features) os << fmt::format(" {:a}", f);
                os << '\n';
            }
        }
        return;
    }
    os << fmt::format("quadratic {} {}\n", spec.nodes(), m);
    for (const auto& q : spec.quadratic_terms()) {
        for (std::size_t k = 0; k < q.matrix.size(); ++k) os << fmt::format("{}{:a}", k ? " " : "", q.matrix[k]);
        os << '\n';
        for (std::size_t k = 0; k < q.offset.size(); ++k) os << fmt::format("{}{:a}", k ? " " : "", q.offset[k]);
        os << '\n';
    }
}

namespace {

double read_double(std::istream& is) {
    std::string token;
    if (!(is >> token)) throw std::runtime_error("objective file truncated");
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::runtime_error("malformed number in objective file: " + token);
    return v;
}

std::size_t read_count(std::istream& is) {
    std::size_t v = 0;
    if (!(is >> v)) throw std::runtime_error("objective file truncated");
    return v;
}

}  // namespace

ObjectiveSpec load_objective(std::istream& is) {
    std::string kind;
    is >> kind;
    if (kind == "logistic") {
        const std::size_t n = read_count(is), m = read_count(is);
        const double sigma = read_double(is);
        std::vector<std::vector<LogisticSample>> per_node(n);
        for (auto& node : per_node) {
            node.resize(read_count(is));
            for (auto& s : node) {
                s.label = read_double(is);
                s.features.resize(m);
                for (auto& f : s.features) f = read_double(is);
            }
        }
        return ObjectiveSpec::logistic(m, sigma, std::move(per_node));
    }
    if (kind == "quadratic") {
        const std::size_t n = read_count(is), m = read_count(is);
        std::vector<QuadraticTerm> terms(n);
        for (auto& q : terms) {
            q.matrix.resize(m * m);
            for (auto& v : q.matrix) v = read_double(is);
            q.offset.resize(m);
            for (auto& v : q.offset) v = read_double(is);
        }
        return ObjectiveSpec::quadratic(m, std::move(terms));
    }
    throw std::runtime_error("unknown objective kind '" + kind + "'");
}

}  // namespace innoprot
