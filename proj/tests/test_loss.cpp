#include <doctest.h>

#include <cmath>
#include <vector>

#include "mdn/loss.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mdn::loss;
using mdn::RngStream;
using mdn::gmm::DiagParams;
using mdn::gmm::MixtureParams;
using mdn::linalg::UpperTriangularRaw;

namespace {

MixtureParams standard_1d() {
    MixtureParams p;
    p.components = 1;
    p.dim = 1;
    p.weights = {1.0};
    p.means = {0.0};
    p.factors_raw = {UpperTriangularRaw{1, {0.0}}};
    return p;
}

/// Head vector [logits | means | factors or sigmas] for random params.
std::vector<double> random_full_head(RngStream& rng, int k, int n) {
    std::vector<double> head(mdn::gmm::full_head_size(k, n));
    for (double& v : head) {
        v = testutil::uniform_in(rng, -1.0, 1.0);
    }
    return head;
}

std::vector<double> random_diag_head(RngStream& rng, int k, int n) {
    std::vector<double> head(mdn::gmm::diag_head_size(k, n));
    for (double& v : head) {
        v = testutil::uniform_in(rng, -1.0, 1.0);
    }
    return head;
}

constexpr LossKind kAllKinds[] = {LossKind::ExactNLL, LossKind::UnweightedJensen,
                                  LossKind::WeightedJensen};

}  // namespace

TEST_CASE("exact NLL of a standard normal at the mode") {
    const std::vector<double> x{0.0};
    CHECK(exact_nll_full(x, standard_1d()) ==
          doctest::Approx(0.9189385332046727).epsilon(1e-12));

    DiagParams d;
    d.components = 1;
    d.dim = 1;
    d.weights = {1.0};
    d.means = {0.0};
    d.log_inv_scales = {0.0};
    CHECK(exact_nll_diag(x, d) == doctest::Approx(0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("exact NLL with a degenerate weight vector uses the live component") {
    RngStream rng(301);
    MixtureParams p = testutil::random_mixture(rng, 3, 2);
    p.weights = {1.0, 0.0, 0.0};
    const std::vector<double> x = testutil::random_vector(rng, 2);
    CHECK(exact_nll_full(x, p) ==
          -mdn::gmm::component_log_density_full(x, p.mean(0), p.factors_raw[0]));
}

TEST_CASE("exact NLL matches the naive extended-precision oracle") {
    RngStream rng(302);
    for (int trial = 0; trial < 40; ++trial) {
        const MixtureParams p = testutil::random_mixture(rng, 4, 3);
        const std::vector<double> x = testutil::random_vector(rng, 3);
        CHECK(std::fabs(exact_nll_full(x, p) + oracle::naive_mixture_log_density(x, p)) < 1e-9);

        const DiagParams d = testutil::random_diag(rng, 4, 3);
        CHECK(std::fabs(exact_nll_diag(x, d) + oracle::naive_mixture_log_density(x, d)) < 1e-9);
    }
}

TEST_CASE("all three objectives coincide for a single component") {
    RngStream rng(303);
    for (int trial = 0; trial < 50; ++trial) {
        const MixtureParams p = testutil::random_mixture(rng, 1, 3);
        const std::vector<double> x = testutil::random_vector(rng, 3);
        const double nll = exact_nll_full(x, p);
        CHECK(std::fabs(surrogate_bound_full(x, p) - nll) < 1e-12);
        CHECK(std::fabs(weighted_jensen_full(x, p) - nll) < 1e-12);

        const DiagParams d = testutil::random_diag(rng, 1, 3);
        const double dnll = exact_nll_diag(x, d);
        CHECK(std::fabs(surrogate_bound_diag(x, d) - dnll) < 1e-12);
        CHECK(std::fabs(weighted_jensen_diag(x, d) - dnll) < 1e-12);
    }
}

TEST_CASE("unweighted surrogate hand case: symmetric two-component mixture") {
    MixtureParams p;
    p.components = 2;
    p.dim = 1;
    p.weights = {0.5, 0.5};
    p.means = {0.0, 0.0};
    p.factors_raw = {UpperTriangularRaw{1, {0.0}}, UpperTriangularRaw{1, {0.0}}};
    const std::vector<double> x{0.0};
    CHECK(surrogate_bound_full(x, p, false) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK(surrogate_bound_full(x, p, false) == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK(exact_nll_full(x, p, false) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    // The weighted variant at the shared mode is the weight entropy, ln 2.
    CHECK(weighted_jensen_full(x, p, false) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("unweighted surrogate dominates when all component terms are non-positive") {
    RngStream rng(304);
    int kept = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const MixtureParams p = testutil::random_mixture(rng, 2, 2);
        const std::vector<double> x = testutil::random_vector(rng, 2, -3.0, 3.0);
        bool all_non_positive = true;
        for (int i = 0; i < p.components; ++i) {
            const double term =
                std::log(p.weights[i]) +
                mdn::gmm::component_log_density_full(x, p.mean(i), p.factors_raw[i], false);
            if (term > 0.0) {
                all_non_positive = false;
            }
        }
        if (!all_non_positive) {
            continue;
        }
        ++kept;
        CHECK(surrogate_bound_full(x, p, false) >= exact_nll_full(x, p, false) - 1e-12);
        // With the normalization constant the bound only grows.
        CHECK(surrogate_bound_full(x, p, true) >= exact_nll_full(x, p, true) - 1e-12);
    }
    CHECK(kept > 100);
}

TEST_CASE("weighted Jensen dominates the exact NLL everywhere") {
    RngStream rng(305);
    for (int trial = 0; trial < 1000; ++trial) {
        const MixtureParams p = testutil::random_mixture(rng, 3, 2);
        const std::vector<double> x = testutil::random_vector(rng, 2, -4.0, 4.0);
        CHECK(weighted_jensen_full(x, p) >= exact_nll_full(x, p) - 1e-12);
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const DiagParams d = testutil::random_diag(rng, 3, 2);
        const std::vector<double> x = testutil::random_vector(rng, 2, -4.0, 4.0);
        CHECK(weighted_jensen_diag(x, d) >= exact_nll_diag(x, d) - 1e-12);
    }
}

TEST_CASE("surrogate objectives reject zero weights") {
    MixtureParams p = standard_1d();
    p.components = 2;
    p.dim = 1;
    p.weights = {1.0, 0.0};
    p.means = {0.0, 0.0};
    p.factors_raw = {UpperTriangularRaw{1, {0.0}}, UpperTriangularRaw{1, {0.0}}};
    const std::vector<double> x{0.0};
    CHECK_THROWS_AS(surrogate_bound_full(x, p), mdn::InvalidInputError);
    CHECK_THROWS_AS(weighted_jensen_full(x, p), mdn::InvalidInputError);
    CHECK_NOTHROW(exact_nll_full(x, p));
}

TEST_CASE("diagonal and full objectives agree under diagonal embedding") {
    RngStream rng(306);
    for (int trial = 0; trial < 100; ++trial) {
        const DiagParams d = testutil::random_diag(rng, 2, 3);
        const MixtureParams full = testutil::embed_diag(d);
        const std::vector<double> x = testutil::random_vector(rng, 3);
        for (LossKind kind : kAllKinds) {
            CHECK(std::fabs(loss_diag(x, d, kind) - loss_full(x, full, kind)) < 1e-12);
        }
    }
}

TEST_CASE("every objective is translation equivariant") {
    RngStream rng(307);
    for (int trial = 0; trial < 50; ++trial) {
        const MixtureParams p = testutil::random_mixture(rng, 2, 2);
        std::vector<double> x = testutil::random_vector(rng, 2);
        const std::vector<double> shift = testutil::random_vector(rng, 2, -3.0, 3.0);
        MixtureParams shifted = p;
        std::vector<double> x2 = x;
        for (int i = 0; i < p.components; ++i) {
            for (int j = 0; j < 2; ++j) {
                shifted.means[i * 2 + j] += shift[j];
            }
        }
        for (int j = 0; j < 2; ++j) {
            x2[j] += shift[j];
        }
        for (LossKind kind : kAllKinds) {
            CHECK(std::fabs(loss_full(x, p, kind) - loss_full(x2, shifted, kind)) < 1e-10);
        }
    }
}

TEST_CASE("batch loss reduces per-sample terms order-preserving") {
    RngStream rng(308);
    const MixtureParams p = testutil::random_mixture(rng, 2, 2);
    const std::vector<double> x = testutil::random_vector(rng, 2);

    const LossValue single = batch_loss_full({x}, {p}, LossKind::ExactNLL);
    CHECK(single.per_sample.size() == 1);
    CHECK(single.total == single.per_sample[0]);
    CHECK(single.total == exact_nll_full(x, p));

    const LossValue doubled = batch_loss_full({x, x}, {p, p}, LossKind::ExactNLL);
    CHECK(doubled.total == doctest::Approx(single.total).epsilon(1e-15));

    std::vector<std::vector<double>> xs;
    std::vector<MixtureParams> ps;
    for (int b = 0; b < 16; ++b) {
        ps.push_back(testutil::random_mixture(rng, 2, 2));
        xs.push_back(testutil::random_vector(rng, 2));
    }
    const LossValue batch = batch_loss_full(xs, ps, LossKind::WeightedJensen);
    double sum = 0.0;
    for (int b = 0; b < 16; ++b) {
        CHECK(batch.per_sample[b] == weighted_jensen_full(xs[b], ps[b]));
        sum += batch.per_sample[b];
    }
    CHECK(std::fabs(batch.total - sum / 16.0) < 1e-12);

    CHECK_THROWS_AS(batch_loss_full({}, {}, LossKind::ExactNLL), mdn::InvalidInputError);
    CHECK_THROWS_AS(batch_loss_full({x}, {}, LossKind::ExactNLL), mdn::ShapeError);
}

TEST_CASE("head evaluation agrees with the simplex-weight objectives") {
    RngStream rng(309);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(3));
        const int n = 1 + static_cast<int>(rng.below(3));
        const std::vector<double> head = random_full_head(rng, k, n);
        const std::vector<double> x = testutil::random_vector(rng, n);
        const MixtureParams p = mdn::gmm::mixture_from_head(head, k, n);
        for (LossKind kind : kAllKinds) {
            for (bool normalized : {true, false}) {
                CHECK(std::fabs(head_loss_full(x, k, n, head, kind, normalized) -
                                loss_full(x, p, kind, normalized)) < 1e-12);
            }
        }
        const std::vector<double> dhead = random_diag_head(rng, k, n);
        const DiagParams d = mdn::gmm::diag_from_head(dhead, k, n);
        for (LossKind kind : kAllKinds) {
            CHECK(std::fabs(head_loss_diag(x, k, n, dhead, kind) - loss_diag(x, d, kind)) <
                  1e-12);
        }
    }
}

TEST_CASE("head gradients match central finite differences") {
    RngStream rng(310);
    const double h = 1e-5;
    for (int trial = 0; trial < 12; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(3));
        const int n = 1 + static_cast<int>(rng.below(4));
        const std::vector<double> x = testutil::random_vector(rng, n);
        const bool full = trial % 2 == 0;
        std::vector<double> head = full ? random_full_head(rng, k, n)
                                        : random_diag_head(rng, k, n);
        auto eval = [&](const std::vector<double>& hd, LossKind kind) {
            return full ? head_loss_full(x, k, n, hd, kind)
                        : head_loss_diag(x, k, n, hd, kind);
        };
        for (LossKind kind : kAllKinds) {
            std::vector<double> grad(head.size());
            if (full) {
                head_loss_full_grad(x, k, n, head, kind, true, grad);
            } else {
                head_loss_diag_grad(x, k, n, head, kind, true, grad);
            }
            for (std::size_t i = 0; i < head.size(); ++i) {
                std::vector<double> probe = head;
                probe[i] = head[i] + h;
                const double up = eval(probe, kind);
                probe[i] = head[i] - h;
                const double down = eval(probe, kind);
                const double numeric = (up - down) / (2.0 * h);
                const double diff = std::fabs(grad[i] - numeric);
                const double scale = std::max({std::fabs(grad[i]), std::fabs(numeric), 1e-10});
                CHECK((diff < 1e-7 || diff / scale < 1e-4));
            }
        }
    }
}

TEST_CASE("loss kind names round-trip") {
    for (LossKind kind : kAllKinds) {
        CHECK(loss_kind_from_string(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(loss_kind_from_string("bogus"), mdn::InvalidInputError);
}
