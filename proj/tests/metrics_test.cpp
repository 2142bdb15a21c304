#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "metric_oracle.hpp"
#include "unext/core/tensor.hpp"
#include "unext/metrics/metrics.hpp"

namespace {

using unext::MetricValues;
using unext::Tensor;

Tensor<double> to_tensor(const oracle::Map& m) {
    Tensor<double> t({1, 1, m.h, m.w});
    std::copy(m.v.begin(), m.v.end(), t.data());
    return t;
}

MetricValues oracle_all(const oracle::Map& pred, const oracle::Map& gt) {
    MetricValues m;
    m.mae = oracle::mae(pred, gt);
    m.miou = oracle::miou(pred, gt);
    m.s_measure = oracle::s_measure(pred, gt);
    m.e_mean = oracle::e_measure_mean(pred, gt);
    m.e_adaptive = oracle::e_measure_adaptive(pred, gt);
    m.f_weighted = oracle::f_weighted(pred, gt);
    const oracle::FTriple f = oracle::f_measures(pred, gt);
    m.f_adaptive = f.adaptive;
    m.f_mean = f.mean;
    m.f_max = f.max;
    m.fw_degenerate = gt.sum() == 0.0;
    return m;
}

void expect_close(const MetricValues& a, const MetricValues& b, double tol) {
    EXPECT_NEAR(a.mae, b.mae, tol);
    EXPECT_NEAR(a.miou, b.miou, tol);
    EXPECT_NEAR(a.s_measure, b.s_measure, tol);
    EXPECT_NEAR(a.e_mean, b.e_mean, tol);
    EXPECT_NEAR(a.e_adaptive, b.e_adaptive, tol);
    EXPECT_NEAR(a.f_weighted, b.f_weighted, tol);
    EXPECT_NEAR(a.f_adaptive, b.f_adaptive, tol);
    EXPECT_NEAR(a.f_mean, b.f_mean, tol);
    EXPECT_NEAR(a.f_max, b.f_max, tol);
}

// Frozen expected values for the seed-1000 16x16 generated pair.
struct Frozen {
    double mae = 0.48309225455738791;
    double miou = 0.33333333333333331;
    double s_measure = 0.35723107852538943;
    double e_mean = 0.4227790585500355;
    double e_adaptive = 0.26898445530383652;
    double f_weighted = 0.57197169456315911;
    double f_adaptive = 0.12745098039215688;
    double f_mean = 0.43650201130582289;
    double f_max = 0.52837423312883447;
};

TEST(MetricGoldens, OracleMatchesFrozenValues) {
    oracle::Map pred, gt;
    oracle::lcg_pair(1000, 16, 16, pred, gt);
    const Frozen f;
    EXPECT_NEAR(oracle::mae(pred, gt), f.mae, 1e-12);
    EXPECT_NEAR(oracle::miou(pred, gt), f.miou, 1e-12);
    EXPECT_NEAR(oracle::s_measure(pred, gt), f.s_measure, 1e-12);
    EXPECT_NEAR(oracle::e_measure_mean(pred, gt), f.e_mean, 1e-12);
    EXPECT_NEAR(oracle::e_measure_adaptive(pred, gt), f.e_adaptive, 1e-12);
    EXPECT_NEAR(oracle::f_weighted(pred, gt), f.f_weighted, 1e-12);
    const oracle::FTriple ft = oracle::f_measures(pred, gt);
    EXPECT_NEAR(ft.adaptive, f.f_adaptive, 1e-12);
    EXPECT_NEAR(ft.mean, f.f_mean, 1e-12);
    EXPECT_NEAR(ft.max, f.f_max, 1e-12);
}

TEST(MetricGoldens, ProductionMatchesFrozenValues) {
    oracle::Map pred, gt;
    oracle::lcg_pair(1000, 16, 16, pred, gt);
    const MetricValues m = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    const Frozen f;
    EXPECT_NEAR(m.mae, f.mae, 1e-9);
    EXPECT_NEAR(m.miou, f.miou, 1e-9);
    EXPECT_NEAR(m.s_measure, f.s_measure, 1e-9);
    EXPECT_NEAR(m.e_mean, f.e_mean, 1e-9);
    EXPECT_NEAR(m.e_adaptive, f.e_adaptive, 1e-9);
    EXPECT_NEAR(m.f_weighted, f.f_weighted, 1e-9);
    EXPECT_NEAR(m.f_adaptive, f.f_adaptive, 1e-9);
    EXPECT_NEAR(m.f_mean, f.f_mean, 1e-9);
    EXPECT_NEAR(m.f_max, f.f_max, 1e-9);
    EXPECT_FALSE(m.fw_degenerate);
}

TEST(MetricEquivalence, FiftySeededPairsAgreeAcrossRoutes) {
    for (uint64_t k = 0; k < 50; ++k) {
        oracle::Map pred, gt;
        oracle::lcg_pair(1000 + k, 16, 16, pred, gt);
        const MetricValues prod = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
        const MetricValues ref = oracle_all(pred, gt);
        expect_close(prod, ref, 1e-9);
        EXPECT_EQ(prod.fw_degenerate, ref.fw_degenerate) << "seed " << 1000 + k;
        for (double v : {prod.mae, prod.miou, prod.s_measure, prod.e_mean, prod.e_adaptive,
                         prod.f_weighted, prod.f_adaptive, prod.f_mean, prod.f_max}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(MetricFixedPoints, PerfectBinaryPrediction) {
    oracle::Map pred, gt;
    oracle::lcg_pair(1000, 16, 16, pred, gt);
    const Tensor<double> g = to_tensor(gt);
    const MetricValues m = unext::compute_metrics(g, g);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.miou, 1.0);
    EXPECT_NEAR(m.s_measure, 1.0, 1e-12);
    EXPECT_NEAR(m.f_weighted, 1.0, 1e-12);
    EXPECT_NEAR(m.e_adaptive, 1.0, 1e-12);
    EXPECT_NEAR(m.f_adaptive, 1.0, 1e-12);
    EXPECT_NEAR(m.f_max, 1.0, 1e-12);
    // At threshold 0 the binarized map is all ones, so the mean sweeps keep
    // a small deficit even for a perfect binary prediction.
    EXPECT_NEAR(m.e_mean, 0.9970703125, 1e-9);
    EXPECT_NEAR(m.f_mean, 0.99811941196698761, 1e-9);
    const MetricValues ref = oracle_all(gt, gt);
    expect_close(m, ref, 1e-9);
}

TEST(MetricFixedPoints, InvertedInteriorSquareZeroesWeightedF) {
    oracle::Map gt(32, 32), pred(32, 32);
    for (int64_t r = 8; r < 24; ++r) {
        for (int64_t c = 8; c < 24; ++c) gt.at(r, c) = 1.0;
    }
    for (int64_t i = 0; i < gt.size(); ++i) pred.v[size_t(i)] = 1.0 - gt.v[size_t(i)];
    EXPECT_EQ(oracle::f_weighted(pred, gt), 0.0);
    const MetricValues m = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    EXPECT_EQ(m.f_weighted, 0.0);
    EXPECT_FALSE(m.fw_degenerate);
}

TEST(MetricDegenerate, EmptyMask) {
    oracle::Map pred, gt_unused;
    oracle::lcg_pair(2024, 12, 9, pred, gt_unused);
    oracle::Map gt(12, 9);
    const MetricValues m = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    EXPECT_NEAR(m.s_measure, 1.0 - pred.mean(), 1e-12);
    EXPECT_EQ(m.f_weighted, 0.0);
    EXPECT_TRUE(m.fw_degenerate);
    EXPECT_EQ(m.f_mean, 0.0);
    EXPECT_EQ(m.f_max, 0.0);
    EXPECT_EQ(m.f_adaptive, 0.0);
    expect_close(m, oracle_all(pred, gt), 1e-9);
}

TEST(MetricDegenerate, FullMask) {
    oracle::Map pred, gt_unused;
    oracle::lcg_pair(7, 10, 11, pred, gt_unused);
    oracle::Map gt(10, 11);
    for (double& v : gt.v) v = 1.0;
    const MetricValues m = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    EXPECT_NEAR(m.s_measure, pred.mean(), 1e-12);
    EXPECT_FALSE(m.fw_degenerate);
    expect_close(m, oracle_all(pred, gt), 1e-9);
}

TEST(MetricDegenerate, EmptyMaskEmptyPredictionHasUnitIou) {
    oracle::Map pred(6, 6), gt(6, 6);
    for (double& v : pred.v) v = 0.2;
    const MetricValues m = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    EXPECT_EQ(m.miou, 1.0);
    EXPECT_NEAR(m.mae, 0.2, 1e-12);
}

TEST(MetricBuckets, MatchDirectThresholdPredicate) {
    std::vector<double> vals = {0.0, 1.0, 0.5, 1.0 / 255.0, 254.0 / 255.0,
                                std::nextafter(1.0 / 255.0, 0.0),
                                std::nextafter(1.0 / 255.0, 1.0)};
    uint64_t s = 99;
    for (int i = 0; i < 500; ++i) {
        s = 6364136223846793005ull * s + 1442695040888963407ull;
        vals.push_back(static_cast<double>(s >> 11) / 9007199254740992.0);
    }
    for (int k = 0; k < 256; k += 17) vals.push_back(k / 255.0);
    for (double v : vals) {
        const int b = unext::metric_detail::bucket_of(v);
        for (int k = 0; k < 256; ++k) {
            EXPECT_EQ(v >= k / 255.0, b >= k) << "v=" << v << " k=" << k;
        }
    }
}

TEST(MetricThresholdEdges, ExactThresholdValuesAgreeAcrossRoutes) {
    oracle::Map pred(16, 16), gtsrc, gt;
    oracle::lcg_pair(4242, 16, 16, gtsrc, gt);
    for (int64_t i = 0; i < 256; ++i) pred.v[size_t(i)] = static_cast<double>(i) / 255.0;
    const MetricValues prod = unext::compute_metrics(to_tensor(pred), to_tensor(gt));
    expect_close(prod, oracle_all(pred, gt), 1e-9);
}

// Brute-force nearest-foreground reference with smallest (column, row)
// tie-break, used to pin the distance transform's index recovery.
void brute_nearest(const oracle::Map& gt, std::vector<int64_t>& dsq, std::vector<int32_t>& nr,
                   std::vector<int32_t>& nc) {
    const int64_t h = gt.h, w = gt.w;
    dsq.assign(static_cast<size_t>(h * w), 0);
    nr.assign(static_cast<size_t>(h * w), -1);
    nc.assign(static_cast<size_t>(h * w), -1);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            int64_t best = std::numeric_limits<int64_t>::max();
            int32_t br = -1, bc = -1;
            for (int64_t fc = 0; fc < w; ++fc) {
                for (int64_t fr = 0; fr < h; ++fr) {
                    if (gt.at(fr, fc) <= 0.5) continue;
                    const int64_t d = (fr - r) * (fr - r) + (fc - c) * (fc - c);
                    if (d < best) {
                        best = d;
                        br = static_cast<int32_t>(fr);
                        bc = static_cast<int32_t>(fc);
                    }
                }
            }
            dsq[static_cast<size_t>(r * w + c)] = best;
            nr[static_cast<size_t>(r * w + c)] = br;
            nc[static_cast<size_t>(r * w + c)] = bc;
        }
    }
}

TEST(DistanceTransform, MatchesBruteForceWithTieBreak) {
    uint64_t s = 31337;
    for (int trial = 0; trial < 60; ++trial) {
        const int64_t h = 9, w = 7;
        oracle::Map gt(h, w);
        int64_t nfg = 0;
        for (int64_t i = 0; i < h * w; ++i) {
            s = 6364136223846793005ull * s + 1442695040888963407ull;
            const double u = static_cast<double>(s >> 11) / 9007199254740992.0;
            gt.v[size_t(i)] = u < 0.12 ? 1.0 : 0.0;
            nfg += static_cast<int64_t>(gt.v[size_t(i)] > 0.5);
        }
        if (nfg == 0) {
            gt.at(trial % h, (trial * 3) % w) = 1.0;
        }
        unext::metric_detail::View gv{gt.v.data(), h, w};
        const auto edt = unext::metric_detail::edt_nearest_fg(gv);
        std::vector<int64_t> dsq;
        std::vector<int32_t> nr, nc;
        brute_nearest(gt, dsq, nr, nc);
        for (int64_t i = 0; i < h * w; ++i) {
            ASSERT_EQ(edt.dist_sq[size_t(i)], dsq[size_t(i)]) << "trial " << trial << " i " << i;
            ASSERT_EQ(edt.near_row[size_t(i)], nr[size_t(i)]) << "trial " << trial << " i " << i;
            ASSERT_EQ(edt.near_col[size_t(i)], nc[size_t(i)]) << "trial " << trial << " i " << i;
        }
    }
}

TEST(DistanceTransform, SymmetricTiesPreferSmallestColumnThenRow) {
    oracle::Map gt(5, 5);
    gt.at(0, 2) = 1.0;
    gt.at(4, 2) = 1.0;
    gt.at(2, 0) = 1.0;
    gt.at(2, 4) = 1.0;
    unext::metric_detail::View gv{gt.v.data(), 5, 5};
    const auto edt = unext::metric_detail::edt_nearest_fg(gv);
    EXPECT_EQ(edt.dist_sq[2 * 5 + 2], 4);
    EXPECT_EQ(edt.near_col[2 * 5 + 2], 0);
    EXPECT_EQ(edt.near_row[2 * 5 + 2], 2);

    oracle::Map col(4, 1);
    col.at(0, 0) = 1.0;
    col.at(2, 0) = 1.0;
    unext::metric_detail::View cv{col.v.data(), 4, 1};
    const auto e2 = unext::metric_detail::edt_nearest_fg(cv);
    EXPECT_EQ(e2.dist_sq[1], 1);
    EXPECT_EQ(e2.near_row[1], 0);
    EXPECT_EQ(e2.near_col[1], 0);
}

TEST(MetricValidation, RejectsBadInputs) {
    Tensor<double> pred({1, 1, 4, 4}), gt({1, 1, 4, 4});
    gt[5] = 0.5;
    EXPECT_THROW(unext::compute_metrics(pred, gt), unext::ValueError);
    gt[5] = 1.0;
    pred[3] = 1.5;
    EXPECT_THROW(unext::compute_metrics(pred, gt), unext::ValueError);
    pred[3] = -0.1;
    EXPECT_THROW(unext::compute_metrics(pred, gt), unext::ValueError);
    pred[3] = 0.5;
    Tensor<double> small({1, 1, 4, 3});
    EXPECT_THROW(unext::compute_metrics(pred, small), unext::ConfigError);
    Tensor<double> multi({1, 2, 4, 4});
    EXPECT_THROW(unext::compute_metrics(multi, multi), unext::ConfigError);
}

} // namespace
