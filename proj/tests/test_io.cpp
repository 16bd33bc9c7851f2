#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "guardcert/io.hpp"
#include "oracles/fixtures.hpp"
#include "support/temp_dir.hpp"

using namespace guardcert;
using namespace guardcert::io;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        out[i++] = x;
    }
    return out;
}

// 2 x 3 matrix [[1, 2, 3], [-1, 0.5, 0.25]] written by hand.
const std::vector<std::uint8_t> kGolden{
    'A',  'V',  'E',  'C',  0x01,                          // magic, version
    0x02, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x01,  // n, d, dtype
    0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40,
    0x00, 0x00, 0x80, 0xbf, 0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0x80, 0x3e,
};

IoErrc decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        decode_avec(bytes);
    } catch (const IoError& e) {
        return e.code();
    }
    FAIL("expected an IoError");
    return IoErrc::open_failed;
}

template <class F>
std::string error_text(F&& f) {
    try {
        f();
    } catch (const IoError& e) {
        return e.what();
    }
    return "";
}

template <class F>
IoErrc error_code(F&& f) {
    try {
        f();
    } catch (const IoError& e) {
        return e.code();
    }
    FAIL("expected an IoError");
    return IoErrc::open_failed;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool bit_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("golden AVEC bytes decode to the known matrix") {
    const Matrix m = decode_avec(kGolden);
    Matrix expected(2, 3);
    expected << 1, 2, 3, -1, 0.5, 0.25;
    CHECK(m == expected);
    CHECK(encode_avec(expected) == kGolden);
}

TEST_CASE("AVEC round trip is bit-identical") {
    std::mt19937_64 rng(1);
    support::TempDir dir("avec");
    const Matrix raw = fixtures::gaussian_matrix(rng, 37, 11, 4.0);
    Matrix widened = raw;
    for (Eigen::Index i = 0; i < widened.size(); ++i) {
        widened.data()[i] = static_cast<float>(raw.data()[i]);
    }
    std::vector<int> labels(37);
    for (int& l : labels) {
        l = fixtures::uniform_int(rng, 0, 1);
    }
    write_avec(ActivationSet(widened, labels), dir / "a.avec");
    const ActivationSet back = read_avec(dir / "a.avec");
    CHECK(bit_equal(back.data(), widened));
    REQUIRE(back.labels());
    CHECK(*back.labels() == labels);

    write_avec(back, dir / "b.avec");
    CHECK(support::read_bytes(dir / "a.avec") == support::read_bytes(dir / "b.avec"));
    CHECK(support::read_file(dir / "a.avec.labels") == support::read_file(dir / "b.avec.labels"));
    CHECK(support::read_bytes(dir / "a.avec").size() == kAvecHeaderSize + 37 * 11 * 4);
}

TEST_CASE("every AVEC malformation has its own error") {
    CHECK(decode_error({'A', 'V', 'E', 'C', 1}) == IoErrc::truncated_header);

    auto bad = kGolden;
    bad[0] = 'X';
    CHECK(decode_error(bad) == IoErrc::bad_magic);

    bad = kGolden;
    bad[4] = 2;
    CHECK(decode_error(bad) == IoErrc::version_mismatch);

    bad = kGolden;
    bad[13] = 2;
    CHECK(decode_error(bad) == IoErrc::unsupported_dtype);

    bad = kGolden;
    bad[5] = 0;
    CHECK(decode_error(bad) == IoErrc::empty_shape);

    bad = kGolden;
    bad.pop_back();
    CHECK(decode_error(bad) == IoErrc::truncated_payload);

    bad = kGolden;
    bad.push_back(0);
    CHECK(decode_error(bad) == IoErrc::trailing_bytes);

    bad = kGolden;
    bad[17] = 0x7f;
    bad[16] = 0x80;  // +inf
    CHECK(decode_error(bad) == IoErrc::non_finite);

    CHECK(error_text([] { decode_avec(std::vector<std::uint8_t>(kGolden.begin(), kGolden.end() - 3)); })
              .find("truncated payload") != std::string::npos);
}

TEST_CASE("label sidecar problems are reported") {
    support::TempDir dir("labels");
    support::write_bytes(dir / "x.avec", kGolden);
    CHECK_FALSE(read_avec(dir / "x.avec").labels());

    support::write_file(dir / "x.avec.labels", "1\n0\n1\n");
    CHECK(error_code([&] { read_avec(dir / "x.avec"); }) == IoErrc::label_count_mismatch);

    support::write_file(dir / "x.avec.labels", "1\n2\n");
    CHECK(error_code([&] { read_avec(dir / "x.avec"); }) == IoErrc::bad_label);

    support::write_file(dir / "x.avec.labels", "1\n0\n");
    CHECK(*read_avec(dir / "x.avec").labels() == std::vector<int>{1, 0});

    support::write_file(dir / "other.txt", "0\n0\n");
    CHECK(*read_avec(dir / "x.avec", dir / "other.txt").labels() == std::vector<int>{0, 0});
    CHECK(error_code([&] { read_avec(dir / "x.avec", dir / "missing.txt"); }) == IoErrc::open_failed);
    CHECK(error_code([&] { read_avec(dir / "missing.avec"); }) == IoErrc::open_failed);
}

TEST_CASE("CSV activations") {
    support::TempDir dir("csv");
    support::write_file(dir / "a.csv", "x0,x1\n1,2\n3,4.5\n");
    const ActivationSet a = read_activations(dir / "a.csv");
    Matrix expected(2, 2);
    expected << 1, 2, 3, 4.5;
    CHECK(a.data() == expected);

    support::write_file(dir / "b.csv", "1,2\n3\n");
    CHECK(error_code([&] { read_activations(dir / "b.csv"); }) == IoErrc::parse_error);
    support::write_file(dir / "c.csv", "1,2\n3,nan\n");
    CHECK(error_code([&] { read_activations(dir / "c.csv"); }) == IoErrc::non_finite);
    support::write_file(dir / "d.csv", "x0,x1\n");
    CHECK(error_code([&] { read_activations(dir / "d.csv"); }) == IoErrc::empty_shape);
    support::write_file(dir / "e.csv", "1,2\n3,abc\n");
    CHECK(error_code([&] { read_activations(dir / "e.csv"); }) == IoErrc::parse_error);
}

TEST_CASE("minimal head round trips") {
    support::TempDir dir("head");
    const json minimal = json::parse(R"({"dim": 1, "weights": [1], "bias": 0})");
    const HeadFile h = head_from_json(minimal);
    CHECK(h.head.weights() == vec({1}));
    CHECK(h.head.bias() == 0.0);
    CHECK_FALSE(h.thresholds);

    write_head(h, dir / "h.json");
    const HeadFile back = read_head(dir / "h.json");
    CHECK(back.head.weights() == h.head.weights());
    CHECK(back.head.bias() == h.head.bias());

    std::mt19937_64 rng(2);
    HeadFile full{ClassifierHead(fixtures::gaussian_vector(rng, 9), 0.1 + 1e-17),
                  Thresholds{0.3141592653589793, std::nextafter(0.2, 0.0)}, "tiny-model"};
    write_head(full, dir / "full.json");
    const HeadFile again = read_head(dir / "full.json");
    CHECK(bit_equal(Matrix(again.head.weights()), Matrix(full.head.weights())));
    CHECK(bit_equal(again.head.bias(), full.head.bias()));
    REQUIRE(again.thresholds);
    CHECK(bit_equal(again.thresholds->tau_star, full.thresholds->tau_star));
    CHECK(bit_equal(again.thresholds->tau_pess, full.thresholds->tau_pess));
    CHECK(again.model_tag == "tiny-model");
}

TEST_CASE("head schema errors name the field path") {
    auto message = [](const char* text) {
        return error_text([&] { head_from_json(json::parse(text)); });
    };
    CHECK(message(R"({"weights": [1], "bias": 0})").find("head.dim: missing field") != std::string::npos);
    CHECK(message(R"({"dim": 3, "weights": [1, 2, "x"], "bias": 0})").find("head.weights[2]: expected number") !=
          std::string::npos);
    CHECK(message(R"({"dim": 2, "weights": [1], "bias": 0})").find("head.weights: expected 2 entries") !=
          std::string::npos);
    CHECK(message(R"({"dim": 1, "weights": [1], "bias": "b"})").find("head.bias") != std::string::npos);
    CHECK(message(R"({"dim": 1, "weights": [1], "bias": 0, "thresholds": {"tau_star": 1.5, "tau_pess": 0.1}})")
              .find("head.thresholds.tau_star") != std::string::npos);
    CHECK(message(R"({"dim": 1, "weights": [1], "bias": 0, "thresholds": {"tau_star": 0.5}})")
              .find("head.thresholds.tau_pess: missing field") != std::string::npos);

    support::TempDir dir("head_bad");
    support::write_file(dir / "broken.json", "{\"dim\": ");
    CHECK(error_code([&] { read_head(dir / "broken.json"); }) == IoErrc::parse_error);
}

TEST_CASE("spec round trips for every kind") {
    std::mt19937_64 rng(3);
    support::TempDir dir("spec");
    const Matrix pts = fixtures::gaussian_matrix(rng, 30, 4);

    SUBCASE("single rectangle") {
        const RectSpec rect = build_single_rect(pts);
        write_spec(rect, dir / "s.json");
        const Spec back = read_spec(dir / "s.json");
        REQUIRE(std::holds_alternative<RectSpec>(back));
        const auto& r = std::get<RectSpec>(back);
        CHECK(bit_equal(r.rotation, rect.rotation));
        CHECK(bit_equal(Matrix(r.lower), Matrix(rect.lower)));
        CHECK(bit_equal(Matrix(r.upper), Matrix(rect.upper)));
        CHECK(r.member_count == 30);
        CHECK_FALSE(r.cluster_id);
        CHECK(spec_to_json(back) == spec_to_json(rect));
    }
    SUBCASE("multiple rectangles") {
        std::vector<int> labels(30);
        for (int i = 0; i < 30; ++i) {
            labels[static_cast<std::size_t>(i)] = i < 12 ? 0 : (i < 27 ? 1 : -1);
        }
        const MultiRectSpec multi = build_multi_rect(pts, labels, {6, "cosine"});
        write_spec(multi, dir / "m.json");
        const Spec back = read_spec(dir / "m.json");
        REQUIRE(std::holds_alternative<MultiRectSpec>(back));
        const auto& m = std::get<MultiRectSpec>(back);
        CHECK(m.rects.size() == 2);
        CHECK(m.noise_count == 3);
        CHECK(m.labels == labels);
        CHECK(m.clustering.min_cluster_size == 6);
        CHECK(*m.rects[1].cluster_id == 1);
        CHECK(spec_to_json(back) == spec_to_json(multi));
    }
    SUBCASE("diagonal mixture keeps the density boundary exactly") {
        GmmSpec g = with_density_boundary(fit_gmm(pts, 1, CovarianceKind::diag, 5).spec, pts);
        REQUIRE(g.density_boundary);
        write_spec(g, dir / "g.json");
        const GmmSpec back = std::get<GmmSpec>(read_spec(dir / "g.json"));
        CHECK(bit_equal(*back.density_boundary, *g.density_boundary));
        CHECK(bit_equal(back.means, g.means));
        CHECK(bit_equal(back.variances, g.variances));
        CHECK(back.kind == CovarianceKind::diag);
        CHECK(back.boundary_low_confidence == g.boundary_low_confidence);
    }
    SUBCASE("full mixture") {
        const GmmSpec g = fit_gmm(pts, 2, CovarianceKind::full, 5).spec;
        write_spec(g, dir / "f.json");
        const GmmSpec back = std::get<GmmSpec>(read_spec(dir / "f.json"));
        REQUIRE(back.covariances.size() == 2);
        CHECK(bit_equal(back.covariances[1], g.covariances[1]));
        CHECK(bit_equal(Matrix(back.weights), Matrix(g.weights)));
        CHECK_FALSE(back.density_boundary);
    }
}

TEST_CASE("spec schema errors name the field path") {
    auto message = [](const json& doc) { return error_text([&] { spec_from_json(doc); }); };
    const RectSpec rect = build_single_rect(Matrix::Identity(3, 3));
    json doc = spec_to_json(rect);

    json wrong = doc;
    wrong["kind"] = "sphere";
    CHECK(message(wrong).find("spec.kind") != std::string::npos);

    wrong = doc;
    wrong["rect"]["lower"][1] = "low";
    CHECK(message(wrong).find("spec.rect.lower[1]: expected number") != std::string::npos);

    wrong = doc;
    wrong["rect"].erase("upper");
    CHECK(message(wrong).find("spec.rect.upper: missing field") != std::string::npos);

    wrong = doc;
    wrong["rect"]["lower"][0] = 10.0;
    CHECK(message(wrong).find("spec.rect") != std::string::npos);

    std::mt19937_64 rng(4);
    const GmmSpec g = fit_gmm(fixtures::gaussian_matrix(rng, 20, 2), 1, CovarianceKind::full, 1).spec;
    json gdoc = spec_to_json(g);
    gdoc["covariances"][0][0][1] = 50.0;
    CHECK(message(gdoc).find("spec") != std::string::npos);
    gdoc = spec_to_json(g);
    gdoc["covariance_kind"] = "tied";
    CHECK(message(gdoc).find("spec.covariance_kind") != std::string::npos);
    CHECK(error_code([&] { spec_from_json(gdoc); }) == IoErrc::schema_violation);
}

TEST_CASE("report for the worked example") {
    RectSpec box;
    box.rotation = Matrix::Identity(2, 2);
    box.lower = vec({0, 0});
    box.upper = vec({1, 1});
    box.member_count = 4;
    MultiRectSpec spec;
    spec.rects.push_back(box);
    const auto cert = verify_multi(ClassifierHead(vec({1, -1}), 0.0), spec, 0.5);
    const json report = exact_report(box, cert, {"literal", std::nullopt});
    CHECK(report["verdict"] == "SAT");
    CHECK(report["certificates"][0]["z_min"] == -1.0);
    CHECK(report["certificates"][0]["verdict"] == "SAT");
    CHECK(report["certificates"][0]["witness_original"] == json::array({0.0, 1.0}));
    CHECK(report["tool"] == "guardcert");
    CHECK(report["version"] == std::string(kToolVersion));
    CHECK(report["spec_kind"] == "single-rect");
    CHECK(report["tau"] == 0.5);
    CHECK(validate_report(report).empty());

    json broken = report;
    broken["certificates"][0].erase("z_min");
    broken["tau"] = 1.5;
    const auto errors = validate_report(broken);
    REQUIRE(errors.size() == 2);
    CHECK(errors[0].find("report.tau") != std::string::npos);
    CHECK(errors[1].find("report.certificates[0].z_min: missing field") != std::string::npos);

    broken = report;
    broken["verdict"] = "UNSAT";
    REQUIRE(validate_report(broken).size() == 1);
    CHECK(validate_report(broken)[0].find("report.verdict") != std::string::npos);
}

TEST_CASE("mixture report") {
    GmmSpec g;
    g.kind = CovarianceKind::diag;
    g.weights = vec({1.0});
    g.means = Matrix::Zero(1, 2);
    g.variances = Matrix::Ones(1, 2);
    const auto cert = certify_gmm(g, ClassifierHead(vec({1, 0}), 0.0), 0.5);
    const json report = gmm_report(g, cert, {"literal", 0.95});
    CHECK(report["total_coverage"] == 0.5);
    CHECK(report["coverage_gate"] == "fail");
    CHECK(validate_report(report).empty());
    CHECK(gmm_report(g, cert, {"star", std::nullopt})["coverage_gate"] == "none");

    json broken = report;
    broken["components"][0]["p"] = "half";
    REQUIRE(validate_report(broken).size() == 1);
    CHECK(validate_report(broken)[0] == "report.components[0].p: expected number");
}

TEST_CASE("numbers print as shortest round-trip text") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    std::mt19937_64 rng(5);
    for (int t = 0; t < 1000; ++t) {
        const double v = fixtures::uniform(rng, -1, 1) * std::pow(10.0, fixtures::uniform_int(rng, -30, 30));
        CHECK(bit_equal(std::stod(format_number(v)), v));
    }
}

TEST_CASE("score CSV parsing") {
    support::TempDir dir("scores");
    support::write_file(dir / "ok.csv", "score,label\n0.9,1\n0.1,0\n");
    const ScoreTable t = read_scores_csv(dir / "ok.csv");
    CHECK(t.scores == std::vector<double>{0.9, 0.1});
    CHECK(t.labels == std::vector<int>{1, 0});
    support::write_file(dir / "nohead.csv", "0.3,1\n");
    CHECK(read_scores_csv(dir / "nohead.csv").scores.size() == 1);

    const std::vector<std::pair<const char*, IoErrc>> bad{
        {"0.9,1,7\n", IoErrc::parse_error},
        {"abc,1\n", IoErrc::parse_error},
        {"inf,1\n", IoErrc::non_finite},
        {"0.5,3\n", IoErrc::bad_label},
        {"score,label\n", IoErrc::empty_shape},
    };
    for (const auto& [text, code] : bad) {
        support::write_file(dir / "bad.csv", text);
        CAPTURE(text);
        CHECK(error_code([&] { read_scores_csv(dir / "bad.csv"); }) == code);
    }
}

TEST_CASE("ROC and sweep CSV layout") {
    const RocAnalysis r = roc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0});
    const std::string text = roc_csv(r, std::nextafter(0.8, 0.0));
    CHECK(text.rfind("# tau_star=0.5\n", 0) == 0);
    CHECK(text.find("# auc=1\n") != std::string::npos);
    CHECK(text.find("threshold,fpr,tpr\n") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5 + 5);

    SweepRow row{10, fidelity_from_counts(5, 5, 5, 5), 2, false, ""};
    CHECK(sweep_csv({row}) == "param,precision,recall,f1,clusters,flagged,note\n10,0.5,0.5,0.5,2,0,\n");
}
