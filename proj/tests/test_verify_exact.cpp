#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "guardcert/regions_rect.hpp"
#include "guardcert/verify_exact.hpp"
#include "oracles/corner_oracle.hpp"
#include "oracles/fixtures.hpp"

using namespace guardcert;

namespace {

constexpr double kSigmoidMinusOne = 0.2689414213699951207;
constexpr double kSigmoidFive = 0.9933071490757151444;

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

RectSpec axis_box(const Vector& lower, const Vector& upper) {
    RectSpec r;
    r.rotation = Matrix::Identity(lower.size(), lower.size());
    r.lower = lower;
    r.upper = upper;
    r.member_count = 1;
    return r;
}

}  // namespace

TEST_CASE("worst-case point follows the weight signs") {
    CHECK(worst_case_point(vec({1, -1}), vec({0, 0}), vec({1, 1})) == vec({0, 1}));
    CHECK(worst_case_point(vec({0, 0}), vec({-1, -1}), vec({1, 1})) == vec({-1, -1}));
}

TEST_CASE("worst-case point agrees with corner enumeration") {
    const Vector w = vec({2, -3, 5});
    const Vector l = vec({1, 2, 3});
    const Vector u = vec({4, 5, 6});
    const Vector x = worst_case_point(w, l, u);
    CHECK(x == vec({1, 5, 3}));
    const auto best = oracle::corner_minimum(w, 0.0, l, u);
    CHECK(best.corner == x);
    CHECK(w.dot(x) == best.logit);
}

TEST_CASE("inverted bounds name the offending dimension") {
    try {
        worst_case_point(vec({1, 1, 1}), vec({0, 2, 0}), vec({1, 1, 1}));
        FAIL("expected an error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("dimension 1") != std::string::npos);
    }
    CHECK_THROWS_AS(worst_case_point(vec({1, 1}), vec({0}), vec({1, 1})), DimensionError);
}

TEST_CASE("worked example is SAT with witness at a corner") {
    const ClassifierHead head(vec({1, -1}), 0.0);
    const auto cert = verify_rect(head, axis_box(vec({0, 0}), vec({1, 1})), 0.5);
    CHECK(cert.z_min == -1.0);
    CHECK(cert.score_min == doctest::Approx(kSigmoidMinusOne).epsilon(1e-15));
    CHECK(cert.verdict == Verdict::sat);
    CHECK(cert.witness_rotated == vec({0, 1}));
    CHECK(cert.witness_original == vec({0, 1}));
    CHECK(cert.margin == doctest::Approx(kSigmoidMinusOne - 0.5).epsilon(1e-14));
}

TEST_CASE("positive offset rectangle is UNSAT") {
    const ClassifierHead head(vec({1}), 5.0);
    const auto cert = verify_rect(head, axis_box(vec({0}), vec({1})), 0.5);
    CHECK(cert.z_min == 5.0);
    CHECK(cert.score_min == doctest::Approx(kSigmoidFive).epsilon(1e-15));
    CHECK(cert.verdict == Verdict::unsat);
    CHECK(cert.margin > 0.0);
}

TEST_CASE("point rectangle reduces to pointwise classification") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        const Vector x0 = fixtures::gaussian_vector(rng, 5);
        const ClassifierHead head(fixtures::gaussian_vector(rng, 5), fixtures::uniform(rng, -1, 1));
        const double tau = fixtures::uniform(rng, 0.05, 0.95);
        const auto cert = verify_rect(head, axis_box(x0, x0), tau);
        const double s = head_score(head, x0).value;
        CHECK(cert.score_min == doctest::Approx(s).epsilon(1e-14));
        CHECK((cert.verdict == Verdict::unsat) == flagged(s, tau));
    }
}

TEST_CASE("a tie at the threshold is SAT") {
    const ClassifierHead head(vec({1}), 0.0);
    const auto cert = verify_rect(head, axis_box(vec({0}), vec({1})), 0.5);
    CHECK(cert.score_min == 0.5);
    CHECK(cert.verdict == Verdict::sat);
    CHECK(cert.margin == 0.0);
}

TEST_CASE("threshold must lie in the open unit interval") {
    const ClassifierHead head(vec({1}), 0.0);
    for (double t : {0.0, 1.0, -0.5, 2.0}) {
        CHECK_THROWS_AS(verify_rect(head, axis_box(vec({0}), vec({1})), t), DomainError);
    }
}

TEST_CASE("certificate invariants hold on random instances") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 300; ++t) {
        const int d = fixtures::uniform_int(rng, 1, 12);
        Vector l;
        Vector u;
        fixtures::random_box(rng, d, l, u);
        const ClassifierHead head(fixtures::gaussian_vector(rng, d), fixtures::uniform(rng, -2, 2));
        const double tau = fixtures::uniform(rng, 0.01, 0.99);
        const auto cert = verify_rect(head, axis_box(l, u), tau);
        CHECK((cert.verdict == Verdict::sat) == (cert.score_min <= tau));
        CHECK(std::abs(cert.score_min - sigmoid(cert.z_min)) <= 1e-12);
        CHECK((cert.witness_rotated.array() >= l.array()).all());
        CHECK((cert.witness_rotated.array() <= u.array()).all());
        const auto best = oracle::corner_minimum(head.weights(), head.bias(), l, u);
        CHECK(std::abs(cert.score_min - best.score) <= 1e-9);
    }
}

TEST_CASE("verdicts are monotone in the threshold") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
        Vector l;
        Vector u;
        fixtures::random_box(rng, 6, l, u);
        const ClassifierHead head(fixtures::gaussian_vector(rng, 6), fixtures::uniform(rng, -2, 2));
        const RectSpec box = axis_box(l, u);
        Verdict previous = Verdict::unsat;
        for (int k = 1; k < 100; ++k) {
            const Verdict v = verify_rect(head, box, k / 100.0).verdict;
            // Once SAT at some tau, SAT at every larger tau.
            if (previous == Verdict::sat) {
                CHECK(v == Verdict::sat);
            }
            previous = v;
        }
    }
}

TEST_CASE("aggregate verdict is a disjunction over rectangles") {
    const ClassifierHead head(vec({1, 1}), 0.0);
    MultiRectSpec spec;
    spec.rects.push_back(axis_box(vec({2, 2}), vec({3, 3})));    // UNSAT at 0.5
    spec.rects.push_back(axis_box(vec({-3, -3}), vec({-2, 0})));  // SAT at 0.5
    const auto mixed = verify_multi(head, spec, 0.5);
    CHECK(mixed.aggregate == Verdict::sat);
    REQUIRE(mixed.rects.size() == 2);
    CHECK(mixed.rects[0].verdict == Verdict::unsat);
    CHECK(mixed.rects[1].verdict == Verdict::sat);
    CHECK(mixed.rects[0].rect_index == 0);
    CHECK(mixed.rects[1].rect_index == 1);

    spec.rects.pop_back();
    spec.rects.push_back(axis_box(vec({1, 1}), vec({2, 2})));
    const auto safe = verify_multi(head, spec, 0.5);
    CHECK(safe.aggregate == Verdict::unsat);
    CHECK(safe.min_margin == std::min(safe.rects[0].margin, safe.rects[1].margin));
    CHECK(safe.min_margin == doctest::Approx(sigmoid(2.0) - 0.5));
}

TEST_CASE("empty multi-rectangle spec is rejected") {
    const ClassifierHead head(vec({1}), 0.0);
    CHECK_THROWS_AS(verify_multi(head, MultiRectSpec{}, 0.5), DomainError);
}

TEST_CASE("a low-scoring construction point forces SAT") {
    std::mt19937_64 rng(29);
    for (int t = 0; t < 50; ++t) {
        const Matrix pts = fixtures::gaussian_matrix(rng, 40, 5);
        const ClassifierHead head(fixtures::gaussian_vector(rng, 5), 0.0);
        const RectSpec rect = build_single_rect(pts);
        MultiRectSpec spec;
        spec.rects.push_back(rect);
        double lowest = 1.0;
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
            lowest = std::min(lowest, head_score(head, pts.row(i).transpose()).value);
        }
        const auto cert = verify_multi(head, spec, 0.5);
        CHECK(cert.rects[0].score_min <= lowest + 1e-12);
        if (lowest <= 0.5) {
            CHECK(cert.aggregate == Verdict::sat);
        }
    }
}

TEST_CASE("witness in original coordinates maps back to the rotated witness") {
    std::mt19937_64 rng(31);
    const Matrix pts = fixtures::gaussian_matrix(rng, 30, 4);
    const RectSpec rect = build_single_rect(pts);
    const ClassifierHead head(fixtures::gaussian_vector(rng, 4), 0.1);
    const auto cert = verify_rect(rotate_head(head, rect.rotation), rect, 0.5);
    CHECK((rect.rotation * cert.witness_original - cert.witness_rotated).norm() <= 1e-12);
    CHECK(head.logit(cert.witness_original) == doctest::Approx(cert.z_min).epsilon(1e-12));
}

TEST_CASE("minimum logit cost grows linearly with dimension") {
    std::mt19937_64 rng(37);
    auto time_for = [&](Eigen::Index d) {
        Vector l;
        Vector u;
        fixtures::random_box(rng, d, l, u);
        const ClassifierHead head(fixtures::gaussian_vector(rng, d), 0.0);
        double best = 1e300;
        double sink = 0.0;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int k = 0; k < 20; ++k) {
                sink += min_logit(head, l, u);
            }
            const auto t1 = std::chrono::steady_clock::now();
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        CHECK(std::isfinite(sink));
        return best;
    };
    const double small = time_for(20000);
    const double large = time_for(200000);
    CHECK(large / small <= 15.0);
}
