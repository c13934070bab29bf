#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "gopsched/suitability.hpp"

using namespace gopsched;

namespace {

template <typename F>
std::string error_code(F &&f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    return "none";
}

const std::vector<double> kRow{12.0, 5.0, 6.5, 4.0};
constexpr std::size_t kGpu = 3;

void expect_row(const std::vector<double> &got, const std::vector<double> &want, double tol) {
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_NEAR(got[i], want[i], tol) << "column " << i;
    }
}

std::vector<double> random_row(Rng &rng, std::size_t n = 4) {
    std::vector<double> t(n);
    for (auto &v : t) {
        v = 0.1 + 20.0 * uniform01(rng);
    }
    return t;
}

} // namespace

TEST(ThresholdGap, PublishedAndDerivedValues) {
    EXPECT_NEAR(threshold_gap(TradeoffPreference::from_performance(0.5)), 5.0, 1e-9);
    EXPECT_NEAR(threshold_gap(TradeoffPreference::from_performance(0.98)), 1.1082, 1e-4);
    EXPECT_NEAR(threshold_gap(TradeoffPreference::from_performance(0.01)), 9.5951, 1e-4);
    EXPECT_NEAR(threshold_gap(TradeoffPreference::from_performance(0.0001)), 14.2103, 1e-4);
}

TEST(ThresholdGap, DecreasingAndSymmetric) {
    double prev = INFINITY;
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        const double d = threshold_gap(TradeoffPreference::from_performance(p));
        EXPECT_LT(d, prev);
        prev = d;
        EXPECT_NEAR(d + threshold_gap(TradeoffPreference::from_performance(1.0 - p)), 10.0, 1e-9);
    }
}

TEST(ThresholdGap, Errors) {
    EXPECT_EQ(error_code([] { threshold_gap({0.0, 1.0}); }), "PrefOutOfRange");
    EXPECT_EQ(error_code([] { threshold_gap({1.0, 0.0}); }), "PrefOutOfRange");
    EXPECT_EQ(error_code([] { threshold_gap({0.5, 0.6}); }), "PrefOutOfRange");
    EXPECT_EQ(error_code([] { threshold_gap({0.5, 0.5}, {0.0, 5.0}); }), "BadFuzzyParams");
}

TEST(ThresholdGap, CostFormAsPublished) {
    EXPECT_NEAR(threshold_gap_cost_form(0.5), -5.0, 1e-12);
    EXPECT_NEAR(threshold_gap_cost_form(0.98), std::log(49.0) - 5.0, 1e-12);
}

TEST(PerfGaps, Examples) {
    expect_row(perf_gaps(kRow, kGpu), {8.0, 1.0, 2.5, 0.0}, 0.0);
    const std::vector<double> faster{3.9, 5.0, 6.0, 4.0};
    EXPECT_NEAR(perf_gaps(faster, kGpu)[0], -0.1, 1e-12);
    expect_row(perf_gaps(std::vector<double>{2, 2, 2, 2}, kGpu), {0, 0, 0, 0}, 0.0);
    const std::vector<std::string> names{"general", "cpu_opt", "mem_opt", "gpu"};
    EXPECT_EQ(error_code([&] { perf_gaps(kRow, names, "tpu"); }), "UnknownBaseline");
}

TEST(WeightRow, HandComputedValues) {
    const auto rates = fixtures::catalog_rates();
    expect_row(transcode_costs(kRow, rates), {5.0e-4, 2.7778e-4, 5.9583e-4, 7.2222e-4}, 1e-8);
    expect_row(weight_row(kRow, rates, kGpu, 5.0), {-0.1986, 0.3017, 0.1556, 0.2850}, 1e-4);
    expect_row(weight_row(kRow, rates, kGpu, 1.0), {-0.4635, 0.0, -0.0934, 0.0570}, 1e-4);
    EXPECT_EQ(weight_row(kRow, rates, kGpu, 1.0)[1], 0.0);
}

TEST(WeightRow, EqualTimesFallBackToCost) {
    const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
    const auto rates = fixtures::catalog_rates();
    const auto w = weight_row(flat, rates, kGpu, 5.0);
    const auto cf = cost_factors(transcode_costs(flat, rates));
    expect_row(w, cf, 0.0);
}

TEST(NormalizeRow, Examples) {
    expect_row(normalize_row(std::vector<double>{-0.1986, 0.3017, 0.1556, 0.2850}), {0.0, 1.0, 0.7079, 0.9665}, 1e-3);
    expect_row(normalize_row(std::vector<double>{-0.4635, 0.0, -0.0934, 0.0570}), {0.0, 0.8905, 0.7110, 1.0}, 1e-3);
    expect_row(normalize_row(std::vector<double>{0.3, 0.3, 0.3}), {1, 1, 1}, 0.0);
    expect_row(normalize_row(std::vector<double>{0.3, 0.3}, Normalization::literal), {0, 0}, 0.0);
    expect_row(normalize_row(std::vector<double>{0.0, 1.0, 0.5}, Normalization::literal), {-1.0, 0.0, -0.5}, 1e-15);
}

TEST(SuitabilityRow, HandOracle) {
    const auto rates = fixtures::catalog_rates();
    expect_row(suitability_row(0, kRow, rates, kGpu, 5.0).scores, {0.0, 1.0, 0.7079, 0.9665}, 1e-3);
    expect_row(suitability_row(0, kRow, rates, kGpu, 1.0).scores, {0.0, 0.8905, 0.7110, 1.0}, 1e-3);
}

TEST(SuitabilityRow, RangeOnRandomRows) {
    Rng rng(2024);
    const auto rates = fixtures::catalog_rates();
    for (int i = 0; i < 10000; ++i) {
        const auto t = random_row(rng);
        const double dth = 30.0 * uniform01(rng);
        const auto s = suitability_row(0, t, rates, kGpu, dth).scores;
        EXPECT_EQ(*std::min_element(s.begin(), s.end()), 0.0);
        EXPECT_EQ(*std::max_element(s.begin(), s.end()), 1.0);
    }
}

TEST(WeightRow, RankFlipMonotonicity) {
    Rng rng(77);
    const auto rates = fixtures::catalog_rates();
    std::size_t violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto t = random_row(rng);
        const auto cf = cost_factors(transcode_costs(t, rates));
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                if (!(cf[i] < cf[j])) {
                    continue;
                }
                double prev = INFINITY;
                for (int d = 0; d <= 30; ++d) {
                    const auto w = weight_row(t, rates, kGpu, d);
                    const double diff = w[i] - w[j];
                    violations += diff > prev ? 1 : 0;
                    prev = diff;
                }
            }
        }
    }
    EXPECT_EQ(violations, 0u);
}

TEST(WeightRow, ScaleCovariance) {
    Rng rng(3);
    const auto rates = fixtures::catalog_rates();
    for (int trial = 0; trial < 500; ++trial) {
        const auto t = random_row(rng);
        const double lambda = 0.25 + 4.0 * uniform01(rng);
        std::vector<double> scaled(t);
        for (auto &v : scaled) {
            v *= lambda;
        }
        const auto g = perf_gaps(t, kGpu);
        const auto gs = perf_gaps(scaled, kGpu);
        const auto phi = transcode_costs(t, rates);
        const auto phis = transcode_costs(scaled, rates);
        const auto cf = cost_factors(phi);
        const auto cfs = cost_factors(phis);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_NEAR(gs[i], lambda * g[i], 1e-12 * lambda * 20);
            EXPECT_NEAR(phis[i], lambda * phi[i], 1e-15);
            EXPECT_NEAR(cfs[i], cf[i], 1e-12);
        }
    }
}

TEST(SuitabilityMatrix, OneRowAndEmpty) {
    const auto cat = default_vm_catalog();
    const auto m = suitability_matrix(fixtures::one_row_etc(), cat, TradeoffPreference::from_performance(0.5), {});
    ASSERT_EQ(m.rows.size(), 1u);
    EXPECT_DOUBLE_EQ(m.rows[0].delta_th, 5.0);
    expect_row(m.rows[0].scores, {0.0, 1.0, 0.7079, 0.9665}, 1e-3);

    EtcMatrix empty;
    empty.vm_types = {"general", "cpu_opt", "mem_opt", "gpu"};
    EXPECT_TRUE(suitability_matrix(empty, cat, 5.0).rows.empty());
}

TEST(SuitabilityMatrix, HighPerformancePreferencePicksGpuWhenGapsAreLarge) {
    Rng rng(8);
    const auto cat = default_vm_catalog();
    const double dth = threshold_gap(TradeoffPreference::from_performance(0.98));
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double gpu = 0.5 + 5.0 * uniform01(rng);
        std::vector<double> t{gpu + 2 * dth + 10 * uniform01(rng), gpu + 2 * dth + 10 * uniform01(rng),
                              gpu + 2 * dth + 10 * uniform01(rng), gpu};
        EtcMatrix etc = fixtures::one_row_etc();
        etc.times_s = t;
        const auto s = suitability_matrix(etc, cat, dth).rows[0].scores;
        const auto best = std::max_element(s.begin(), s.end()) - s.begin();
        EXPECT_TRUE(best == 3 || best == 1) << best;
        ++checked;
    }
    EXPECT_EQ(checked, 1000);
}

TEST(NaiveRow, Examples) {
    const auto rates = fixtures::catalog_rates();
    expect_row(naive_row(kRow, rates, {1.0}), {0.0, 0.875, 0.6875, 1.0}, 1e-12);
    const auto k0 = naive_row(kRow, rates, {0.0});
    EXPECT_DOUBLE_EQ(k0[1], 1.0);
    EXPECT_DOUBLE_EQ(k0[3], 0.0);
    EXPECT_GT(k0[0], k0[2]);
    expect_row(k0, {0.5, 1.0, 0.284375, 0.0}, 1e-3);
    expect_row(naive_row(std::vector<double>{7.0}, std::vector<double>{0.65}, {0.5}), {1.0}, 0.0);
    EXPECT_EQ(error_code([&] { naive_row(kRow, rates, {1.5}); }), "BadNaiveParams");
}

TEST(NaiveRow, AffineInvariantInTime) {
    Rng rng(12);
    const auto rates = fixtures::catalog_rates();
    for (int trial = 0; trial < 500; ++trial) {
        const auto t = random_row(rng);
        std::vector<double> shifted(t);
        const double scale = 0.5 + 3.0 * uniform01(rng);
        const double shift = 5.0 * uniform01(rng);
        for (auto &v : shifted) {
            v = scale * v + shift;
        }
        // k = 1 isolates the time term, which is the affine-invariant part.
        expect_row(naive_row(shifted, rates, {1.0}), naive_row(t, rates, {1.0}), 1e-9);
    }
}

TEST(ScoresCsv, Format) {
    const auto cat = default_vm_catalog();
    std::ostringstream out;
    write_scores(out, to_scores(suitability_matrix(fixtures::one_row_etc(), cat, 5.0)));
    EXPECT_EQ(out.str(), "task_id,delta_th,general,cpu_opt,mem_opt,gpu\n0,5.0000,0.0000,1.0000,0.7079,0.9665\n");
    std::ostringstream naive;
    write_scores(naive, naive_matrix(fixtures::one_row_etc(), cat, {1.0}));
    EXPECT_EQ(naive.str(), "task_id,delta_th,general,cpu_opt,mem_opt,gpu\n0,na,0.0000,0.8750,0.6875,1.0000\n");
}
