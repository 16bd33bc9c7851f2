#include "guardcert/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "guardcert/gmm.hpp"
#include "guardcert/hdbscan.hpp"
#include "guardcert/io.hpp"
#include "guardcert/metrics.hpp"
#include "guardcert/regions_rect.hpp"
#include "guardcert/verify_exact.hpp"

namespace guardcert::cli {

namespace {

struct UsageError : Error {
    using Error::Error;
};

std::uint64_t parse_seed(const std::string& text, const char* what) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError(std::string(what) + " must be a non-negative integer, got '" + text + "'");
    }
    return v;
}

std::uint64_t resolve_seed(const std::optional<std::string>& flag) {
    if (flag) {
        return parse_seed(*flag, "--seed");
    }
    if (const char* env = std::getenv("GUARDCERT_SEED"); env != nullptr && *env != '\0') {
        return parse_seed(env, "GUARDCERT_SEED");
    }
    return kDefaultSeed;
}

std::vector<int> parse_grid(const std::string& text) {
    std::vector<int> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            throw UsageError("--grid entries must be integers, got '" + item + "'");
        }
        grid.push_back(v);
    }
    if (grid.empty()) {
        throw UsageError("--grid is empty");
    }
    return grid;
}

struct ResolvedTau {
    double value;
    std::string source;
};

ResolvedTau resolve_tau(const std::string& text, const io::HeadFile& head) {
    if (text == "star" || text == "pess") {
        if (!head.thresholds) {
            throw UsageError("--tau " + text + " needs thresholds in the head file");
        }
        return {text == "star" ? head.thresholds->tau_star : head.thresholds->tau_pess, text};
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError("--tau must be a number, 'star' or 'pess', got '" + text + "'");
    }
    if (!(v > 0.0 && v < 1.0)) {
        throw UsageError("--tau must lie in (0, 1)");
    }
    return {v, "literal"};
}

Membership membership_for(const io::Spec& spec, std::optional<GmmDensity>& density) {
    if (const auto* rect = std::get_if<RectSpec>(&spec)) {
        return [rect](const auto& x) { return rect_contains(*rect, x); };
    }
    if (const auto* multi = std::get_if<MultiRectSpec>(&spec)) {
        return [multi](const auto& x) { return multi_rect_contains(*multi, x); };
    }
    const auto& g = std::get<GmmSpec>(spec);
    if (!g.density_boundary) {
        throw DomainError("GMM spec has no density boundary");
    }
    density.emplace(g);
    const GmmDensity* dens = &*density;
    return [&g, dens](const auto& x) { return gmm_contains(g, *dens, x); };
}

std::string fmt(double v) { return io::format_number(v); }

// --- spec build -----------------------------------------------------------

struct BuildArgs {
    std::string method;
    std::string activations;
    std::optional<int> min_cluster_size;
    std::optional<int> components;
    std::optional<std::string> covariance;
    std::optional<std::string> seed;
    std::string out;
};

int cmd_spec_build(const BuildArgs& a, std::ostream& out, std::ostream& err) {
    const bool rect_flags = a.min_cluster_size.has_value();
    const bool gmm_flags = a.components || a.covariance || a.seed;
    if (a.method == "single-rect" && (rect_flags || gmm_flags)) {
        throw UsageError("single-rect takes no clustering or mixture flags");
    }
    if (a.method == "multi-rect" && gmm_flags) {
        throw UsageError("multi-rect does not take --components, --covariance or --seed");
    }
    if (a.method == "gmm" && rect_flags) {
        throw UsageError("gmm does not take --min-cluster-size");
    }

    const ActivationSet set = io::read_activations(a.activations);
    const Matrix& x = set.data();

    if (a.method == "single-rect") {
        const RectSpec rect = build_single_rect(x);
        io::write_spec(rect, a.out);
        out << "single-rect: 1 rectangle over " << rect.member_count << " points, d=" << rect.dim()
            << "\n";
        return kExitOk;
    }

    if (a.method == "multi-rect") {
        if (!a.min_cluster_size) {
            throw UsageError("multi-rect needs --min-cluster-size");
        }
        const int m = *a.min_cluster_size;
        if (m < 2 || m > x.rows()) {
            throw UsageError("--min-cluster-size must lie in [2, " + std::to_string(x.rows()) + "]");
        }
        const ClusterResult clusters = hdbscan(x, m);
        if (clusters.num_clusters == 0) {
            err << "error: fewer than two clusters: every point is noise at min cluster size " << m
                << "\n";
            return kExitError;
        }
        if (clusters.num_clusters == 1) {
            err << "warning: fewer than two clusters: a single cluster was found at min cluster size "
                << m << "\n";
        }
        const MultiRectSpec spec = build_multi_rect(x, clusters.labels, {m, "cosine"});
        io::write_spec(spec, a.out);
        out << "multi-rect: " << clusters.num_clusters << " clusters, " << spec.noise_count
            << " noise points\n";
        return kExitOk;
    }

    if (a.method == "gmm") {
        if (!a.components) {
            throw UsageError("gmm needs --components");
        }
        const CovarianceKind kind = parse_covariance_kind(a.covariance.value_or("full"));
        const std::uint64_t seed = resolve_seed(a.seed);
        const GmmFit fit = fit_gmm(x, *a.components, kind, seed);
        const GmmSpec spec = with_density_boundary(fit.spec, x);
        io::write_spec(spec, a.out);
        if (!fit.converged) {
            err << "warning: EM stopped after " << fit.iterations << " iterations without converging\n";
        }
        if (spec.boundary_low_confidence) {
            err << "warning: density boundary estimated from fewer than 20 points\n";
        }
        out << "gmm: " << spec.components() << " components (" << to_string(kind) << "), "
            << fit.iterations << " EM iterations, log-likelihood "
            << fmt(fit.log_likelihood.back()) << ", density boundary " << fmt(*spec.density_boundary)
            << "\n";
        return kExitOk;
    }
    throw UsageError("unknown method '" + a.method + "'");
}

// --- verify ---------------------------------------------------------------

struct VerifyArgs {
    std::string spec;
    std::string head;
    std::string tau;
    std::optional<double> min_coverage;
    std::string report;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
    const io::Spec spec = io::read_spec(a.spec);
    const io::HeadFile head = io::read_head(a.head);
    if (io::spec_dim(spec) != head.head.dim()) {
        throw DimensionError("spec has d=" + std::to_string(io::spec_dim(spec)) + " but head has d=" +
                             std::to_string(head.head.dim()));
    }
    const ResolvedTau tau = resolve_tau(a.tau, head);
    const io::ReportContext ctx{tau.source, a.min_coverage};

    if (const auto* g = std::get_if<GmmSpec>(&spec)) {
        if (a.min_coverage && !(*a.min_coverage >= 0.0 && *a.min_coverage <= 1.0)) {
            throw UsageError("--min-coverage must lie in [0, 1]");
        }
        const ProbCertificate cert = certify_gmm(*g, head.head, tau.value);
        io::write_json(io::gmm_report(spec, cert, ctx), a.report);
        out << "coverage " << fmt(cert.total) << " at tau " << fmt(tau.value) << "\n";
        if (a.min_coverage && cert.total < *a.min_coverage) {
            out << "coverage below required " << fmt(*a.min_coverage) << "\n";
            return kExitViolation;
        }
        return kExitOk;
    }
    if (a.min_coverage) {
        throw UsageError("--min-coverage applies only to gmm specs");
    }

    MultiCertificate cert;
    if (const auto* rect = std::get_if<RectSpec>(&spec)) {
        MultiRectSpec wrapped;
        wrapped.rects.push_back(*rect);
        cert = verify_multi(head.head, wrapped, tau.value);
    } else {
        cert = verify_multi(head.head, std::get<MultiRectSpec>(spec), tau.value);
    }
    io::write_json(io::exact_report(spec, cert, ctx), a.report);
    for (const auto& c : cert.rects) {
        out << "rect " << c.rect_index << ": " << to_string(c.verdict) << " (min score "
            << fmt(c.score_min) << ", margin " << fmt(c.margin) << ")\n";
    }
    out << to_string(cert.aggregate) << "\n";
    return cert.aggregate == Verdict::sat ? kExitViolation : kExitOk;
}

// --- thresholds, fidelity, sweep -------------------------------------------

int cmd_thresholds(const std::string& scores_path, const std::string& out_path, std::ostream& out) {
    const io::ScoreTable table = io::read_scores_csv(scores_path);
    const RocAnalysis analysis = roc(table.scores, table.labels);
    std::vector<double> harmful;
    for (std::size_t i = 0; i < table.scores.size(); ++i) {
        if (table.labels[i] == 1) {
            harmful.push_back(table.scores[i]);
        }
    }
    const double tau_pess = pessimistic_threshold(harmful);
    io::write_text(io::roc_csv(analysis, tau_pess), out_path);
    out << "tau_star " << fmt(analysis.tau_star) << ", tau_pess " << fmt(tau_pess) << ", auc "
        << fmt(analysis.auc) << "\n";
    return kExitOk;
}

int cmd_fidelity(const std::string& spec_path, const std::string& harmful_path,
                 const std::string& benign_path, const std::optional<std::string>& out_path,
                 std::ostream& out) {
    const io::Spec spec = io::read_spec(spec_path);
    const ActivationSet harmful = io::read_activations(harmful_path);
    const ActivationSet benign = io::read_activations(benign_path);
    if (harmful.dim() != io::spec_dim(spec) || benign.dim() != io::spec_dim(spec)) {
        throw DimensionError("holdout dimension does not match the spec");
    }
    std::optional<GmmDensity> density;
    const FidelityReport report = fidelity(membership_for(spec, density), harmful, benign);
    const io::json doc = io::fidelity_report(spec, report);
    if (out_path) {
        io::write_json(doc, *out_path);
        out << "precision " << fmt(report.precision) << ", recall " << fmt(report.recall) << ", f1 "
            << fmt(report.f1) << "\n";
    } else {
        out << doc.dump(2) << "\n";
    }
    return kExitOk;
}

struct SweepArgs {
    std::string method;
    std::string activations;
    std::string harmful;
    std::string benign;
    std::string grid;
    std::optional<std::string> covariance;
    std::optional<std::string> seed;
    std::string out;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
    SweepConfig config;
    if (a.method == "multi-rect") {
        config.method = SweepMethod::multi_rect;
        if (a.covariance || a.seed) {
            throw UsageError("multi-rect sweep does not take --covariance or --seed");
        }
    } else if (a.method == "gmm") {
        config.method = SweepMethod::gmm;
        config.covariance = parse_covariance_kind(a.covariance.value_or("full"));
        config.seed = resolve_seed(a.seed);
    } else {
        throw UsageError("sweep --method must be multi-rect or gmm");
    }
    config.grid = parse_grid(a.grid);
    const ActivationSet construction = io::read_activations(a.activations);
    const ActivationSet harmful = io::read_activations(a.harmful);
    const ActivationSet benign = io::read_activations(a.benign);
    const auto rows = sweep(construction, harmful, benign, config);
    io::write_text(io::sweep_csv(rows), a.out);
    for (const auto& r : rows) {
        if (r.flagged) {
            err << "warning: grid value " << r.param << ": " << r.note << "\n";
        }
    }
    out << rows.size() << " sweep rows written\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Verify sigmoid-head guardrail classifiers against activation-space specifications",
                 "guardcert"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(io::kToolVersion));

    auto* spec_cmd = app.add_subcommand("spec", "Specification construction");
    spec_cmd->require_subcommand(1);
    BuildArgs build;
    auto* build_cmd = spec_cmd->add_subcommand("build", "Build a specification from activations");
    build_cmd->add_option("--method", build.method, "single-rect, multi-rect or gmm")
        ->required()
        ->check(CLI::IsMember({"single-rect", "multi-rect", "gmm"}));
    build_cmd->add_option("--activations", build.activations, "Construction activations (AVEC or CSV)")
        ->required();
    build_cmd->add_option("--min-cluster-size", build.min_cluster_size, "HDBSCAN min cluster size");
    build_cmd->add_option("--components", build.components, "Mixture components");
    build_cmd->add_option("--covariance", build.covariance, "full or diag");
    build_cmd->add_option("--seed", build.seed, "EM seed (overrides GUARDCERT_SEED)");
    build_cmd->add_option("--out", build.out, "Output spec JSON")->required();

    VerifyArgs verify;
    auto* verify_cmd = app.add_subcommand("verify", "Verify a head against a specification");
    verify_cmd->add_option("--spec", verify.spec)->required();
    verify_cmd->add_option("--head", verify.head)->required();
    verify_cmd->add_option("--tau", verify.tau, "Threshold: a number, 'star' or 'pess'")->required();
    verify_cmd->add_option("--min-coverage", verify.min_coverage, "Coverage gate for gmm specs");
    verify_cmd->add_option("--report", verify.report, "Output report JSON")->required();

    std::string scores_path;
    std::string roc_out;
    auto* thr_cmd = app.add_subcommand("thresholds", "ROC analysis and thresholds from scores");
    thr_cmd->add_option("--scores", scores_path, "CSV with columns score,label")->required();
    thr_cmd->add_option("--out", roc_out, "Output ROC CSV")->required();

    std::string fid_spec;
    std::string fid_harmful;
    std::string fid_benign;
    std::optional<std::string> fid_out;
    auto* fid_cmd = app.add_subcommand("fidelity", "Specification precision and recall on holdouts");
    fid_cmd->add_option("--spec", fid_spec)->required();
    fid_cmd->add_option("--harmful", fid_harmful)->required();
    fid_cmd->add_option("--benign", fid_benign)->required();
    fid_cmd->add_option("--out", fid_out, "Output JSON (default: stdout)");

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "Fidelity across a parameter grid");
    sweep_cmd->add_option("--method", sw.method, "multi-rect or gmm")->required();
    sweep_cmd->add_option("--activations", sw.activations)->required();
    sweep_cmd->add_option("--harmful", sw.harmful)->required();
    sweep_cmd->add_option("--benign", sw.benign)->required();
    sweep_cmd->add_option("--grid", sw.grid, "Comma-separated values")->required();
    sweep_cmd->add_option("--covariance", sw.covariance);
    sweep_cmd->add_option("--seed", sw.seed);
    sweep_cmd->add_option("--out", sw.out, "Output CSV")->required();

    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("guardcert");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) {
        argv.push_back(s.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (build_cmd->parsed()) {
            return cmd_spec_build(build, out, err);
        }
        if (verify_cmd->parsed()) {
            return cmd_verify(verify, out);
        }
        if (thr_cmd->parsed()) {
            return cmd_thresholds(scores_path, roc_out, out);
        }
        if (fid_cmd->parsed()) {
            return cmd_fidelity(fid_spec, fid_harmful, fid_benign, fid_out, out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(sw, out, err);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace guardcert::cli
