#include <doctest.h>

#include <random>

#include "innoprot/protection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace innoprot;

namespace {

oracle::Sequence still(const oracle::Vec& x0, std::size_t steps = 0) {
    oracle::Sequence s;
    s.x0 = x0;
    s.xi.assign(steps, oracle::Vec(x0.size(), 0.0));
    return s;
}

oracle::Vec random_vec(std::mt19937_64& rng, std::size_t dim, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    oracle::Vec v(dim);
    for (auto& c : v) c = normal(rng);
    return v;
}

struct Case {
    oracle::Sequence seq;
    NodeSignal sig;
    double gamma, b;
    oracle::Vec z;
};

Case random_case(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Case c;
    const std::size_t dim = 1 + rng() % 4;
    c.seq = oracle::random_sequence(rng, dim, 5 + rng() % 60, 0.3 + 0.6 * unit(rng), rng() % 2);
    c.sig = to_signal(c.seq);
    c.gamma = 0.05 + 0.9 * unit(rng);
    const double limit = 1.0 / std::sqrt(1.0 - c.gamma);
    c.b = (2.0 * unit(rng) - 1.0) * 0.95 * std::min(limit, 1.5);
    c.z = rng() % 3 ? random_vec(rng, dim) : oracle::Vec(dim, 0.0);
    return c;
}

EstimatorModel model_of(const Case& c) { return {c.gamma, c.b, c.z, std::nullopt}; }

}  // namespace

TEST_CASE("derived constants") {
    const auto k = DerivedConstants::make(0.25, 0.8);
    CHECK(k.c == doctest::Approx(0.6));
    CHECK(k.rho == doctest::Approx(0.5));
    CHECK(k.nu == doctest::Approx(0.8 - 0.75 - 0.125));
    CHECK(k.h(2.0) == doctest::Approx((0.64 + 0.8 - 0.25) / (1 - 0.48)));
    CHECK(stable(0.5, 1.4));
    CHECK_FALSE(stable(0.5, 1.5));
    CHECK_THROWS_AS(DerivedConstants::make(0.5, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(DerivedConstants::make(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("moment series on a still trajectory") {
    const auto sig = to_signal(still({1.0, -2.0, 0.5}, 10));
    for (double b : {0.0, 0.5, -0.9}) {
        const EstimatorModel model{0.4, b, {0.2, 0.1, 0.0}, std::nullopt};
        const auto ms = moment_series(sig, model);
        CHECK(ms.q == 0.0);
        CHECK(ms.r == 0.0);
        CHECK(ms.p == 0.0);
        const double bc = b * b * 0.6;
        CHECK(ms.s == doctest::Approx(ms.eznorm[0] / (1 - bc)).epsilon(1e-12));
        CHECK_FALSE(ms.tail_warning);
    }
}

TEST_CASE("moment series at b = 0 sums without a geometric factor") {
    std::mt19937_64 rng(1);
    const auto seq = oracle::random_sequence(rng, 3, 30, 0.6);
    const auto ms = moment_series(to_signal(seq), {0.3, 0.0, {}, std::nullopt});
    CHECK(ms.s == doctest::Approx(ms.eznorm[0] + 0.3 * ms.q).epsilon(1e-12));
}

TEST_CASE("moment series follows the exact joint moments") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = random_case(rng);
        const auto ms = moment_series(c.sig, model_of(c));
        auto mo = oracle::initial_moments(c.seq, c.gamma, c.z);
        for (std::size_t t = 0; t <= std::min(ms.horizon, c.seq.xi.size()); ++t) {
            for (std::size_t k = 0; k < c.seq.x0.size(); ++k) {
                CHECK(ms.ez_at(t)[k] == doctest::Approx(mo.ez[k]).epsilon(1e-10));
                CHECK(ms.ee_at(t)[k] == doctest::Approx(mo.ee[k]).epsilon(1e-10));
            }
            CHECK(ms.eznorm[t] == doctest::Approx(mo.ez2).epsilon(1e-10));
            if (t < c.seq.xi.size()) mo = oracle::step(mo, c.seq.xi[t], c.gamma, c.b);
        }
    }
}

TEST_CASE("series identities") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_case(rng);
        const auto k = DerivedConstants::make(c.gamma, c.b);
        const auto ms = moment_series(c.sig, model_of(c));
        const oracle::Vec x0 = c.seq.x0, xs = c.seq.limit();
        const double bb = 1 - c.b;
        oracle::Vec theta(x0.size());
        for (std::size_t i = 0; i < x0.size(); ++i)
            theta[i] = bb * ms.ee_at(0)[i] + (c.b - k.rho) * ms.ez_at(0)[i] - k.nu * x0[i];
        oracle::Vec d0(x0.size());
        for (std::size_t i = 0; i < x0.size(); ++i) d0[i] = xs[i] - x0[i];
        const double lhs = bb * ms.p + (c.b - k.rho) * ms.r;
        const double rhs = oracle::dot(theta, d0) + 0.5 * k.nu * (oracle::dot(xs, xs) - oracle::dot(x0, x0) - ms.q);
        const double scale = 1 + std::abs(bb * ms.p) + std::abs((c.b - k.rho) * ms.r) + std::abs(rhs);
        CHECK(std::abs(lhs - rhs) <= 1e-7 * scale);
        const double s_closed = (ms.eznorm[0] + c.gamma * ms.q) / (1 - c.b * k.c);
        CHECK(std::abs(ms.s - s_closed) <= 1e-8 * std::max(1.0, s_closed));
    }
}

TEST_CASE("exact protection against the moment oracle") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = random_case(rng);
        const double exact = exact_protection(c.sig, c.seq.limit(), model_of(c));
        const double oracle_value = oracle::limit_error(c.seq, c.gamma, c.b, c.z);
        CHECK(rel_diff(exact, oracle_value) <= 1e-9);
    }
}

TEST_CASE("exact protection against exhaustive enumeration") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        // With b = 0 nothing carries past the signal, so the enumerated
        // terminal error is the limit.
        const auto seq = oracle::random_sequence(rng, 2, 9, 0.7);
        const auto z = random_vec(rng, 2);
        const double enumerated = oracle::enumerate(
            seq, 0.35, 0.0, z, [&](const auto&, const auto& zs, const auto& es) {
                (void)zs;
                return oracle::dot(es.back(), es.back());
            });
        const double exact = exact_protection(to_signal(seq), seq.limit(), {0.35, 0.0, z, std::nullopt});
        CHECK(rel_diff(exact, enumerated) <= 1e-10);
    }
}

TEST_CASE("still-trajectory closed forms") {
    const oracle::Vec x0{1.0, 2.0, -1.0};
    const auto sig = to_signal(still(x0, 5));
    const double n2 = oracle::dot(x0, x0);
    CHECK(exact_protection(sig, x0, {0.3, 0.0, x0, std::nullopt}) == doctest::Approx(0.0));
    CHECK(exact_protection(sig, x0, {0.3, 0.0, {}, std::nullopt}) == doctest::Approx(0.7 * n2).epsilon(1e-12));
    CHECK(protection_b0(sig, x0, 0.3, x0) == doctest::Approx(0.0));

    const oracle::Vec xs{0.5, 0.0, 1.0};
    oracle::Vec d0(3), m(3);
    for (int k = 0; k < 3; ++k) {
        d0[k] = xs[k] - x0[k];
        m[k] = x0[k] + 0.7 * d0[k];
    }
    const double expect = 0.7 * oracle::dot(m, m) + 0.3 * 0.49 * oracle::dot(d0, d0);
    CHECK(protection_b0(sig, xs, 0.3) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(exact_protection(sig, xs, {0.3, 0.0, {}, std::nullopt}) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("b = 0 closed form matches exact protection") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_case(rng);
        const auto xs = c.seq.limit();
        CHECK(rel_diff(protection_b0(c.sig, xs, c.gamma, c.z), exact_protection(c.sig, xs, {c.gamma, 0.0, c.z, std::nullopt})) <= 1e-9);
    }
}

TEST_CASE("b = 0 closed form grows with the initial state scale") {
    std::mt19937_64 rng(7);
    const auto base = oracle::random_sequence(rng, 3, 20, 0.5);
    const auto xs = base.limit();
    double prev = 0;
    for (double s = 1.0; s <= 15.5; s += 0.5) {
        oracle::Sequence seq = base;
        for (std::size_t k = 0; k < 3; ++k) {
            seq.x0[k] = s * base.x0[k];
            seq.xi.back()[k] += xs[k] - seq.limit()[k];
        }
        const double v = protection_b0(to_signal(seq), xs, 0.5);
        if (s > 4) CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("b = 1 unbiased form") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        auto c = random_case(rng);
        const auto b1 = protection_b1(c.sig, c.gamma);
        const double exact = exact_protection(c.sig, c.seq.limit(), {c.gamma, 1.0, {}, std::nullopt});
        CHECK(rel_diff(b1.value, exact) <= 1e-9);
        CHECK(rel_diff(b1.value, oracle::limit_error(c.seq, c.gamma, 1.0, oracle::Vec(c.seq.x0.size(), 0.0))) <= 1e-9);
        for (double v : b1.mean_error) CHECK(std::abs(v) <= 1e-9 * (1 + norm(c.sig.x0)));
    }

    const oracle::Vec x0{1.0, -3.0};
    const double value = protection_b1(to_signal(still(x0, 4)), 0.25).value;
    CHECK(value == doctest::Approx(2 * 0.75 * 10.0 / 0.25).epsilon(1e-12));

    const auto seq = oracle::random_sequence(rng, 2, 10, 0.5);
    CHECK(protection_b1(to_signal(seq), 0.999999).value < 1e-4 * protection_b1(to_signal(seq), 0.5).value);
}

TEST_CASE("lower bound dominance and equality at b = 0") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = random_case(rng);
        const auto xs = c.seq.limit();
        const auto model = model_of(c);
        const double exact = exact_protection(c.sig, xs, model);
        for (EtaChoice eta : {EtaChoice{0.5}, EtaChoice{1.0}, EtaChoice{2.0}, EtaChoice{OptimizeEta{}}}) {
            const auto lb = protection_lower_bound(c.sig, xs, model, eta);
            CHECK(lb.value <= exact + 1e-8 * (1 + std::abs(exact)));
            CHECK(lb.eta > 0.0);
        }
        const auto opt = protection_lower_bound(c.sig, xs, model, OptimizeEta{});
        CHECK(opt.value >= protection_lower_bound(c.sig, xs, model, 1.0).value - 1e-12 * (1 + std::abs(exact)));

        EstimatorModel zero = model;
        zero.b = 0.0;
        const double e0 = exact_protection(c.sig, xs, zero);
        CHECK(std::abs(protection_lower_bound(c.sig, xs, zero, 1.0).value - e0) <= 1e-9 * (1 + e0));
    }
    const auto sig = to_signal(still({1.0}));
    CHECK_THROWS_AS(protection_lower_bound(sig, Vector{1.0}, {0.5, 0.5, {}, std::nullopt}, 0.0), std::invalid_argument);
}

TEST_CASE("random initial estimate through its second moment") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        auto c = random_case(rng);
        const auto xs = c.seq.limit();
        const auto a = random_vec(rng, c.seq.x0.size()), d = random_vec(rng, c.seq.x0.size());
        oracle::Vec mean(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) mean[k] = 0.5 * (a[k] + d[k]);
        const double second = 0.5 * (oracle::dot(a, a) + oracle::dot(d, d));
        const double mixed = exact_protection(c.sig, xs, {c.gamma, c.b, mean, second});
        const double avg = 0.5 * (exact_protection(c.sig, xs, {c.gamma, c.b, a, std::nullopt}) +
                                  exact_protection(c.sig, xs, {c.gamma, c.b, d, std::nullopt}));
        CHECK(rel_diff(mixed, avg) <= 1e-9);
    }
    const auto sig = to_signal(still({1.0, 1.0}));
    CHECK_THROWS_AS(exact_protection(sig, Vector{1.0, 1.0}, {0.5, 0.5, {1.0, 1.0}, 1.0}), std::invalid_argument);
}

TEST_CASE("unstable estimators are rejected") {
    const auto sig = to_signal(still({1.0}));
    CHECK_THROWS_AS(moment_series(sig, {0.5, 1.5, {}, std::nullopt}), std::invalid_argument);
    CHECK_THROWS_AS(exact_protection(sig, Vector{1.0}, {0.5, -1.5, {}, std::nullopt}), std::invalid_argument);
    AdversaryConfig cfg;
    cfg.b = 1.5;
    CHECK_THROWS_AS(monte_carlo_protection(sig, cfg, 1000), std::invalid_argument);
}

TEST_CASE("entropy floor") {
    const auto sig = to_signal(still({1.0, 2.0}, 3));
    CHECK(entropy_floor(sig, 0.2) == doctest::Approx(0.16 * 5.0));
    std::mt19937_64 rng(11);
    const auto seq = to_signal(oracle::random_sequence(rng, 3, 20, 0.5));
    CHECK(entropy_floor(seq, 0.5) >= entropy_floor(seq, 0.9));
    const auto ms = moment_series(seq, {0.3, 0.0, {}, std::nullopt});
    CHECK(entropy_floor(seq, 0.3) == doctest::Approx(0.21 * (dot(seq.x0, seq.x0) + ms.q)).epsilon(1e-12));
}

TEST_CASE("network protection") {
    CHECK(network_protection({{0, 3.0}, {1, 3.0}, {2, 3.0}}).value == 3.0);
    CHECK(network_protection({{0, 3.0}, {1, 3.0}}).node == 0);
    const auto np = network_protection({{0, 2.0}, {1, 1.0}});
    CHECK(np.value == 1.0);
    CHECK(np.node == 1);
    CHECK_THROWS_AS(network_protection({}), std::invalid_argument);
}

TEST_CASE("Monte Carlo with perfect interception") {
    std::mt19937_64 rng(12);
    const auto sig = to_signal(oracle::random_sequence(rng, 3, 20, 0.6));
    AdversaryConfig cfg;
    cfg.b = 0.7;
    cfg.forced_outcome = true;
    const auto mc = monte_carlo_protection(sig, cfg, 200);
    CHECK(mc.mean <= 1e-24);
    CHECK(mc.std_err <= 1e-24);
    CHECK_THROWS_AS(monte_carlo_protection(sig, cfg, 99), std::invalid_argument);
    cfg.mode = SharingMode::state;
    CHECK_THROWS_AS(monte_carlo_protection(sig, cfg, 200), std::invalid_argument);
}

TEST_CASE("Monte Carlo tail closure on still trajectories") {
    const oracle::Vec x0{1.0, -0.5, 2.0};
    const auto sig = to_signal(still(x0));
    AdversaryConfig cfg;
    cfg.gamma = 0.5;
    cfg.seed = 3;
    cfg.b = 0.0;
    auto mc = monte_carlo_protection(sig, cfg, 20000);
    CHECK(std::abs(mc.mean - protection_b0(sig, x0, 0.5)) <= 3 * mc.std_err);
    CHECK(std::abs(mc.mean - 0.5 * oracle::dot(x0, x0)) <= 3 * mc.std_err);

    cfg.b = 1.0;
    mc = monte_carlo_protection(sig, cfg, 20000);
    CHECK(std::abs(mc.mean - protection_b1(sig, 0.5).value) <= 3 * mc.std_err);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(mc.mean_error[k]) <= 4 * mc.error_std_err[k]);

    cfg.b = -0.8;
    mc = monte_carlo_protection(sig, cfg, 20000);
    const double exact = exact_protection(sig, x0, EstimatorModel::from(cfg));
    CHECK(std::abs(mc.mean - exact) <= 3 * mc.std_err);
}

TEST_CASE("Monte Carlo on decaying signals and thread independence") {
    std::mt19937_64 rng(13);
    const auto seq = oracle::random_sequence(rng, 2, 25, 0.7);
    const auto sig = to_signal(seq);
    AdversaryConfig cfg;
    cfg.gamma = 0.4;
    cfg.b = 0.6;
    cfg.z_init = {0.5, 0.5};
    cfg.seed = 77;
    const auto a = monte_carlo_protection(sig, cfg, 30000, std::nullopt, 1);
    const auto b = monte_carlo_protection(sig, cfg, 30000, std::nullopt, 5);
    CHECK(a.mean == b.mean);
    CHECK(a.std_err == b.std_err);
    CHECK(a.runs == 30000);
    CHECK(a.horizon == 25);
    const double exact = exact_protection(sig, seq.limit(), EstimatorModel::from(cfg));
    CHECK(std::abs(a.mean - exact) <= 3 * a.std_err);
}

TEST_CASE("protection report") {
    std::mt19937_64 rng(14);
    const auto seq = oracle::random_sequence(rng, 3, 30, 0.6);
    const auto sig = to_signal(seq);
    const auto xs = seq.limit();
    const auto r0 = protection_report(sig, xs, {0.5, 0.0, {}, std::nullopt});
    REQUIRE(r0.b0_value.has_value());
    CHECK_FALSE(r0.b1_value.has_value());
    CHECK(rel_diff(*r0.b0_value, r0.exact) <= 1e-9);
    CHECK(rel_diff(r0.lower_bound.value, r0.exact) <= 1e-9);
    const auto r1 = protection_report(sig, xs, {0.5, 1.0, {}, std::nullopt}, 2.0);
    REQUIRE(r1.b1_value.has_value());
    CHECK(rel_diff(*r1.b1_value, r1.exact) <= 1e-9);
    CHECK(r1.lower_bound.eta == 2.0);
    CHECK(r1.lower_bound_optimized.value >= r1.lower_bound.value - 1e-12);
    CHECK(r1.entropy_floor == doctest::Approx(entropy_floor(sig, 0.5)));
}
