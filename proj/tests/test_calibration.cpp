#include "impact/calibration.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

using namespace impact;

namespace {

// INTC book: (mu+, mu-, V) per level, and the printed q_i, Q_i.
struct Row {
    double mu_plus, mu_minus, size, q, Q;
};
constexpr std::array<Row, 10> kIntcBook{{
    {8.151, 1.008, 108.665, 878.623, 878.623},
    {2.146, 0.242, 133.250, 1178.778, 2057.401},
    {0.965, 0.205, 417.150, 1960.409, 4017.810},
    {0.704, 0.247, 776.340, 2214.474, 6232.284},
    {0.423, 0.101, 113.832, 479.835, 6712.119},
    {0.291, 0.094, 94.858, 293.322, 7005.441},
    {0.201, 0.126, 118.644, 189.527, 7194.968},
    {0.219, 0.101, 102.234, 220.446, 7415.414},
    {0.213, 0.055, 109.862, 421.166, 7836.580},
    {0.137, 0.111, 106.525, 132.373, 7968.954},
}};

std::vector<LevelStats> intc_levels() {
    std::vector<LevelStats> out;
    for (std::size_t i = 0; i < kIntcBook.size(); ++i) {
        out.push_back({static_cast<int>(i + 1), kIntcBook[i].mu_plus, kIntcBook[i].mu_minus, kIntcBook[i].size,
                       static_cast<double>(i + 1)});
    }
    return out;
}

std::vector<ImbalanceSample> logistic_samples(std::mt19937_64& rng, std::size_t n, double b0, double b1,
                                              double spread = 2.0) {
    std::normal_distribution<double> delta(0.0, spread);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ImbalanceSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].window = i;
        out[i].delta = std::round(delta(rng));
        out[i].down = u(rng) < logistic(b0 + b1 * out[i].delta);
    }
    return out;
}

double sample_loglik(double b0, double b1, const std::vector<ImbalanceSample>& s) {
    std::vector<double> x;
    std::vector<int> y;
    for (const auto& v : s) {
        x.push_back(v.delta);
        y.push_back(v.down ? 1 : 0);
    }
    return oracle::logistic_loglik(b0, b1, x, y);
}

} // namespace

TEST(LevelStats, IntcFirstLevelDepth) {
    const auto levels = intc_levels();
    // The printed 878.623 comes from unrounded rates; the rounded inputs give 878.70.
    EXPECT_NEAR(levels[0].expected_depth(), 108.665 * 8.151 / 1.008, 1e-12);
    EXPECT_NEAR(levels[0].expected_depth(), 878.62, 0.1);
}

TEST(LevelStats, IntcCumulativeDepth) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) acc += kIntcBook[i].q;
    EXPECT_NEAR(acc, 6232.28, 5e-3);
    const auto levels = intc_levels();
    const auto q = cumulative_depth(levels);
    for (std::size_t i = 0; i < kIntcBook.size(); ++i) {
        EXPECT_NEAR(q[i] / kIntcBook[i].Q, 1.0, 2e-3) << "level " << i + 1;
        if (i > 0) {
            EXPECT_GE(q[i], q[i - 1]);
        }
    }
}

TEST(LevelStats, OneOrderRestingHundredSeconds) {
    // One 100-share submit and its cancel 100 s later: mu+ = 1/100, per-order death rate 1/100.
    LevelStats l{1, 0.01, 0.01, 100.0, 1.0};
    EXPECT_DOUBLE_EQ(l.expected_depth(), 100.0);
}

TEST(EstimateEta, IntcRows) {
    std::vector<double> depth, offset;
    for (std::size_t i = 0; i < kIntcBook.size(); ++i) {
        depth.push_back(kIntcBook[i].Q);
        offset.push_back(static_cast<double>(i + 1));
    }
    const auto fit = estimate_eta(depth, offset);
    EXPECT_NEAR(fit.eta, 0.0011, 0.1 * 0.0011);
    EXPECT_NEAR(fit.eta, 0.001087, 5e-7);
    EXPECT_NEAR(to_basis_points(fit.eta, 0.01, 48.625), 0.00226, 0.0001);
}

TEST(EstimateEta, IntcFromRates) {
    const auto fit = estimate_eta(intc_levels());
    EXPECT_NEAR(fit.eta, 0.0011, 0.1 * 0.0011);
    EXPECT_TRUE(fit.excluded.empty());
    EXPECT_EQ(fit.n_levels, 10u);
}

TEST(EstimateEta, ExactLinearBook) {
    std::vector<double> depth, offset;
    for (int i = 1; i <= 8; ++i) {
        depth.push_back(300.0 * i + 17.0 * i * i);
        offset.push_back(0.5 + 0.001 * depth.back());
    }
    const auto fit = estimate_eta(depth, offset);
    EXPECT_NEAR(fit.eta, 0.001, 1e-15);
    EXPECT_NEAR(fit.intercept, 0.5, 1e-12);
    EXPECT_NEAR(fit.r2, 1.0, 1e-12);
}

TEST(EstimateEta, NormalEquationsHold) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> depth, offset;
    for (int i = 1; i <= 12; ++i) {
        depth.push_back(500.0 * i);
        offset.push_back(0.5 + 0.0012 * depth.back() + noise(rng));
    }
    const auto fit = estimate_eta(depth, offset);
    double r_sum = 0.0, rx_sum = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double r = offset[i] - fit.intercept - fit.eta * depth[i];
        r_sum += r;
        rx_sum += r * depth[i];
        scale += std::abs(offset[i] * depth[i]);
    }
    EXPECT_NEAR(r_sum, 0.0, 1e-10 * depth.size());
    EXPECT_NEAR(rx_sum, 0.0, 1e-10 * scale);
}

TEST(EstimateEta, ExcludesZeroCancellationLevels) {
    auto levels = intc_levels();
    levels[4].mu_minus = 0.0;
    const auto fit = estimate_eta(levels);
    ASSERT_EQ(fit.excluded.size(), 1u);
    EXPECT_EQ(fit.excluded[0], 5);
    EXPECT_EQ(fit.n_levels, 9u);
}

TEST(EstimateEta, Errors) {
    std::vector<double> d{1.0, 2.0}, o{1.0, 2.0};
    EXPECT_THROW((void)estimate_eta(d, o), DataError);
    std::vector<double> flat{5.0, 5.0, 5.0}, o3{1.0, 2.0, 3.0};
    EXPECT_THROW((void)estimate_eta(flat, o3), DataError);
}

TEST(Logistic, IntcEquilibriumImbalance) {
    const auto fit = LogisticFit::from_coefficients(0.0697, 0.7624);
    EXPECT_NEAR(fit.delta_bar(), -0.0915, 2e-4);
    EXPECT_NEAR(fit.probability_down(fit.delta_bar()), 0.5, 1e-15);
}

TEST(Logistic, RecoversKnownCoefficients) {
    // Over 40 seeds the 2-SE band should cover both coefficients most of the time.
    int covered = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::mt19937_64 rng(seed);
        const auto s = logistic_samples(rng, 4000, 0.0697, 0.7624);
        const auto fit = fit_logistic(s);
        if (std::abs(fit.b0 - 0.0697) < 2.0 * fit.se_b0 && std::abs(fit.b1 - 0.7624) < 2.0 * fit.se_b1) ++covered;
    }
    EXPECT_GE(covered, 32);
}

TEST(Logistic, FirstOrderConditionAtFit) {
    std::mt19937_64 rng(17);
    const auto s = logistic_samples(rng, 3000, -0.3, 0.5);
    const auto fit = fit_logistic(s);
    const double h = 1e-5;
    const double g0 = (sample_loglik(fit.b0 + h, fit.b1, s) - sample_loglik(fit.b0 - h, fit.b1, s)) / (2 * h);
    const double g1 = (sample_loglik(fit.b0, fit.b1 + h, s) - sample_loglik(fit.b0, fit.b1 - h, s)) / (2 * h);
    EXPECT_NEAR(g0, 0.0, 1e-4);
    EXPECT_NEAR(g1, 0.0, 1e-4);
    EXPECT_NEAR(fit.log_likelihood, sample_loglik(fit.b0, fit.b1, s), 1e-8 * std::abs(fit.log_likelihood));
}

TEST(Logistic, AnalyticScoreVanishesAtFit) {
    std::mt19937_64 rng(19);
    const auto s = logistic_samples(rng, 3000, 0.2, 0.9);
    const auto fit = fit_logistic(s);
    double g0 = 0.0, g1 = 0.0;
    for (const auto& v : s) {
        const double r = (v.down ? 1.0 : 0.0) - 1.0 / (1.0 + std::exp(-(fit.b0 + fit.b1 * v.delta)));
        g0 += r;
        g1 += r * v.delta;
    }
    EXPECT_NEAR(g0, 0.0, 1e-8 * static_cast<double>(s.size()));
    EXPECT_NEAR(g1, 0.0, 1e-8 * static_cast<double>(s.size()));
}

TEST(Logistic, SymmetricDataHasZeroOffset) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> delta(0.0, 2.0), noise(0.0, 1.0);
    std::vector<ImbalanceSample> s(5000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i].delta = delta(rng);
        s[i].down = s[i].delta + noise(rng) > 0.0;
    }
    const auto fit = fit_logistic(s);
    EXPECT_LT(std::abs(fit.b0), 3.0 * fit.se_b0);
    EXPECT_NEAR(fit.delta_bar(), 0.0, 0.05);
    EXPECT_GT(fit.b1, 0.0);
}

TEST(Logistic, PermutationInvariant) {
    std::mt19937_64 rng(29);
    auto s = logistic_samples(rng, 2000, 0.1, 0.6);
    const auto a = fit_logistic(s);
    std::shuffle(s.begin(), s.end(), rng);
    const auto b = fit_logistic(s);
    EXPECT_NEAR(a.b0, b.b0, 1e-9);
    EXPECT_NEAR(a.b1, b.b1, 1e-9);
}

TEST(Logistic, SeparationIsAnError) {
    std::vector<ImbalanceSample> s;
    for (int i = -5; i <= 5; ++i) {
        if (i == 0) continue;
        s.push_back({0, static_cast<double>(i), i > 0});
    }
    EXPECT_THROW((void)fit_logistic(s), DataError);
}

TEST(Logistic, SingleOutcomeIsAnError) {
    std::vector<ImbalanceSample> s{{0, 1.0, true}, {1, -1.0, true}, {2, 0.5, true}};
    EXPECT_THROW((void)fit_logistic(s), DataError);
}

TEST(Logistic, ZeroSlopeIsDegenerate) {
    // Outcome independent of delta and perfectly balanced within each delta value.
    std::vector<ImbalanceSample> s;
    for (int i = -3; i <= 3; ++i) {
        for (int k = 0; k < 10; ++k) s.push_back({0, static_cast<double>(i), k % 2 == 0});
    }
    EXPECT_THROW((void)fit_logistic(s), DataError);
}

TEST(PermanentImpact, IntcExactIncrement) {
    const auto fit = LogisticFit::from_coefficients(0.0697, 0.7624);
    const auto p = permanent_impact(fit, 0.5, 115.0, 1.0);
    EXPECT_NEAR(p.Lambda, 2.0 * (1.0 / (1.0 + std::exp(-0.7624)) - 0.5) * 0.5, 1e-15);
    EXPECT_NEAR(p.Lambda, 0.1821, 0.001);
    EXPECT_GE(p.Lambda, 0.180);
    EXPECT_LE(p.Lambda, 0.184);
    EXPECT_NEAR(p.lambda, 0.00158, 5e-6);
    EXPECT_NEAR(p.lambda, 0.0016, 5e-5);
}

TEST(PermanentImpact, TangentDiffersByKnownAmount) {
    const auto fit = LogisticFit::from_coefficients(0.0697, 0.7624);
    const auto exact = permanent_impact(fit, 0.5, 115.0);
    const auto tangent = permanent_impact(fit, 0.5, 115.0, 1.0, LambdaVariant::tangent);
    EXPECT_NEAR(tangent.Lambda, 0.1906, 1e-4);
    EXPECT_NEAR(tangent.Lambda - exact.Lambda, 0.0087, 1e-4);
}

TEST(PermanentImpact, ZeroSlopeGivesZero) {
    const auto p = permanent_impact(LogisticFit::from_coefficients(0.3, 0.0), 0.5, 100.0);
    EXPECT_EQ(p.Lambda, 0.0);
    EXPECT_EQ(p.lambda, 0.0);
}

TEST(PermanentImpact, MonotoneInSlopeAndMoveSize) {
    double previous = -1.0;
    for (double b1 = 0.1; b1 < 3.0; b1 += 0.1) {
        const double v = permanent_impact(LogisticFit::from_coefficients(0.1, b1), 0.5, 100.0).Lambda;
        EXPECT_GT(v, previous);
        previous = v;
    }
    previous = -1.0;
    for (double z = 0.1; z < 3.0; z += 0.1) {
        const double v = permanent_impact(LogisticFit::from_coefficients(0.1, 0.7), z, 100.0).Lambda;
        EXPECT_GT(v, previous);
        previous = v;
    }
}

TEST(PermanentImpact, Preconditions) {
    const auto fit = LogisticFit::from_coefficients(0.1, 0.7);
    EXPECT_THROW((void)permanent_impact(fit, 0.0, 100.0), DomainError);
    EXPECT_THROW((void)permanent_impact(fit, 0.5, 0.0), DomainError);
    EXPECT_THROW((void)permanent_impact(fit, 0.5, 100.0, 0.0), DomainError);
}

TEST(Units, IntcBasisPoints) {
    EXPECT_NEAR(to_basis_points(0.0016, 0.01, 48.625), 0.00329, 5e-6);
    // Printed as 0.0032: the table truncates rather than rounds.
    EXPECT_EQ(std::trunc(to_basis_points(0.0016, 0.01, 48.625) * 1e4) / 1e4, 0.0032);
    EXPECT_NEAR(to_basis_points(0.0011, 0.01, 48.625), 0.00226, 5e-6);
    EXPECT_EQ(to_basis_points(0.0, 0.01, 48.625), 0.0);
}

TEST(Units, RoundTrip) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(1e-6, 10.0);
    for (int i = 0; i < 100; ++i) {
        const double v = u(rng), tick = 0.01 * (1 + i % 3), price = 5.0 + 10.0 * u(rng);
        EXPECT_NEAR(from_basis_points(to_basis_points(v, tick, price), tick, price), v, 1e-12 * v);
    }
}

TEST(AssembleParameters, IntcImpactRatio) {
    // Unrounded calibrated values 0.00226 and 0.00329 bps/share.
    const auto p = assemble_parameters(to_basis_points(0.0011, 0.01, 48.625), to_basis_points(0.0016, 0.01, 48.625),
                                       2.035353e-5);
    EXPECT_EQ(p.gamma, p.lambda);
    EXPECT_NEAR(p.impact_ratio(), 1.450, 0.01);
    EXPECT_EQ(p.unit, PriceUnit::basis_point);
}

TEST(AssembleParameters, MtbImpactRatio) {
    const auto p = assemble_parameters(0.137, 0.033, 1e-5);
    EXPECT_NEAR(p.impact_ratio(), 0.237, 0.02);
}

TEST(AssembleParameters, ZeroGammaRule) {
    const auto p = assemble_parameters(0.002, 0.003, 2e-5, GammaRule::zero);
    EXPECT_EQ(p.gamma, 0.0);
    EXPECT_DOUBLE_EQ(p.k(), p.rho);
}

TEST(AssembleParameters, MonitorRateScalesGamma) {
    const auto p = assemble_parameters(0.002, 0.003, 2e-5, GammaRule::permanent_over_mu, 2.0);
    EXPECT_DOUBLE_EQ(p.gamma, 0.0015);
}
