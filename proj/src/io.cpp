#include "guardcert/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace guardcert::io {

std::string_view to_string(IoErrc code) {
    switch (code) {
        case IoErrc::open_failed: return "cannot open file";
        case IoErrc::write_failed: return "write failed";
        case IoErrc::truncated_header: return "truncated header";
        case IoErrc::bad_magic: return "bad magic";
        case IoErrc::version_mismatch: return "version mismatch";
        case IoErrc::unsupported_dtype: return "unsupported dtype";
        case IoErrc::empty_shape: return "empty shape";
        case IoErrc::truncated_payload: return "truncated payload";
        case IoErrc::trailing_bytes: return "trailing bytes";
        case IoErrc::non_finite: return "non-finite value";
        case IoErrc::label_count_mismatch: return "label count mismatch";
        case IoErrc::bad_label: return "bad label";
        case IoErrc::parse_error: return "parse error";
        case IoErrc::schema_violation: return "schema violation";
    }
    return "unknown error";
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(IoErrc::open_failed, path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_string(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(IoErrc::open_failed, path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[at + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        return std::nullopt;
    }
    return v;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (!trim(line).empty()) {
            out.push_back(line);
        }
    }
    return out;
}

// JSON accessors that report the offending field path.

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
    throw IoError(IoErrc::schema_violation, path + ": " + what);
}

const json& need(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) {
        schema_fail(path, "expected object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        schema_fail(path + "." + key, "missing field");
    }
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        schema_fail(path, "expected number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        schema_fail(path, "expected finite number");
    }
    return v;
}

long as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        schema_fail(path, "expected integer");
    }
    return j.get<long>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) {
        schema_fail(path, "expected string");
    }
    return j.get<std::string>();
}

Vector as_vector(const json& j, const std::string& path, std::optional<Eigen::Index> size = {}) {
    if (!j.is_array()) {
        schema_fail(path, "expected array");
    }
    if (size && static_cast<Eigen::Index>(j.size()) != *size) {
        schema_fail(path, "expected " + std::to_string(*size) + " entries, got " +
                              std::to_string(j.size()));
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = as_number(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
}

Matrix as_matrix(const json& j, const std::string& path, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
        schema_fail(path, "expected array of " + std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string rp = path + "[" + std::to_string(r) + "]";
        m.row(r) = as_vector(j[static_cast<std::size_t>(r)], rp, cols).transpose();
    }
    return m;
}

json vector_json(const Eigen::Ref<const Vector>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v[i]);
    }
    return arr;
}

json matrix_json(const Eigen::Ref<const Matrix>& m) {
    json arr = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        arr.push_back(vector_json(m.row(r).transpose()));
    }
    return arr;
}

json rect_json(const RectSpec& rect) {
    json j;
    j["rotation"] = matrix_json(rect.rotation);
    j["lower"] = vector_json(rect.lower);
    j["upper"] = vector_json(rect.upper);
    j["member_count"] = rect.member_count;
    j["cluster_id"] = rect.cluster_id ? json(*rect.cluster_id) : json(nullptr);
    return j;
}

RectSpec rect_from_json(const json& j, const std::string& path, Eigen::Index d) {
    RectSpec rect;
    rect.rotation = as_matrix(need(j, "rotation", path), path + ".rotation", d, d);
    rect.lower = as_vector(need(j, "lower", path), path + ".lower", d);
    rect.upper = as_vector(need(j, "upper", path), path + ".upper", d);
    rect.member_count = as_integer(need(j, "member_count", path), path + ".member_count");
    const json& cid = need(j, "cluster_id", path);
    if (!cid.is_null()) {
        rect.cluster_id = static_cast<int>(as_integer(cid, path + ".cluster_id"));
    }
    try {
        validate_rect(rect);
    } catch (const Error& e) {
        schema_fail(path, e.what());
    }
    return rect;
}

json certificate_json(const ExactCertificate& c, const std::optional<int>& cluster_id) {
    json j;
    j["rect_index"] = c.rect_index;
    j["cluster_id"] = cluster_id ? json(*cluster_id) : json(nullptr);
    j["verdict"] = std::string(to_string(c.verdict));
    j["z_min"] = c.z_min;
    j["score_min"] = c.score_min;
    j["tau"] = c.tau;
    j["margin"] = c.margin;
    j["witness_rotated"] = vector_json(c.witness_rotated);
    j["witness_original"] = vector_json(c.witness_original);
    return j;
}

json report_header(const Spec& spec, double tau, const ReportContext& ctx) {
    json j;
    j["tool"] = std::string(kToolName);
    j["version"] = std::string(kToolVersion);
    j["spec_kind"] = std::string(spec_kind(spec));
    j["spec_params"] = spec_parameters(spec);
    j["tau"] = tau;
    j["tau_source"] = ctx.tau_source;
    return j;
}

}  // namespace

// --- AVEC -----------------------------------------------------------------

std::vector<std::uint8_t> encode_avec(const Matrix& data) {
    if (data.rows() < 1 || data.cols() < 1) {
        throw IoError(IoErrc::empty_shape, "cannot encode an empty matrix");
    }
    if (data.rows() > 0xffffffffL || data.cols() > 0xffffffffL) {
        throw IoError(IoErrc::schema_violation, "matrix too large for AVEC");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kAvecHeaderSize + static_cast<std::size_t>(data.size()) * 4);
    for (char c : {'A', 'V', 'E', 'C'}) {
        out.push_back(static_cast<std::uint8_t>(c));
    }
    out.push_back(kAvecVersion);
    put_u32(out, static_cast<std::uint32_t>(data.rows()));
    put_u32(out, static_cast<std::uint32_t>(data.cols()));
    out.push_back(kAvecFloat32);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(data(r, c))));
        }
    }
    return out;
}

Matrix decode_avec(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kAvecHeaderSize) {
        throw IoError(IoErrc::truncated_header, "file has " + std::to_string(bytes.size()) +
                                                    " bytes, header needs " +
                                                    std::to_string(kAvecHeaderSize));
    }
    if (bytes[0] != 'A' || bytes[1] != 'V' || bytes[2] != 'E' || bytes[3] != 'C') {
        throw IoError(IoErrc::bad_magic, "expected \"AVEC\"");
    }
    if (bytes[4] != kAvecVersion) {
        throw IoError(IoErrc::version_mismatch,
                      "expected version 1, got " + std::to_string(bytes[4]));
    }
    const std::uint64_t n = get_u32(bytes, 5);
    const std::uint64_t d = get_u32(bytes, 9);
    if (bytes[13] != kAvecFloat32) {
        throw IoError(IoErrc::unsupported_dtype, "dtype " + std::to_string(bytes[13]));
    }
    if (n == 0 || d == 0) {
        throw IoError(IoErrc::empty_shape, "n and d must be positive");
    }
    const std::uint64_t need = n * d * 4;
    const std::uint64_t have = bytes.size() - kAvecHeaderSize;
    if (have < need) {
        throw IoError(IoErrc::truncated_payload, "payload has " + std::to_string(have) +
                                                     " bytes, expected " + std::to_string(need));
    }
    if (have > need) {
        throw IoError(IoErrc::trailing_bytes,
                      std::to_string(have - need) + " bytes after the payload");
    }
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t at = kAvecHeaderSize;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const float v = std::bit_cast<float>(get_u32(bytes, at));
            if (!std::isfinite(v)) {
                throw IoError(IoErrc::non_finite, "entry (" + std::to_string(r) + ", " +
                                                      std::to_string(c) + ")");
            }
            m(r, c) = static_cast<double>(v);
            at += 4;
        }
    }
    return m;
}

fs::path labels_sidecar(const fs::path& avec_path) {
    fs::path p = avec_path;
    p += ".labels";
    return p;
}

std::vector<int> read_labels(const fs::path& path, std::size_t expected) {
    const auto lines = lines_of(read_string(path));
    if (lines.size() != expected) {
        throw IoError(IoErrc::label_count_mismatch, path.string() + " has " +
                                                        std::to_string(lines.size()) +
                                                        " labels, expected " +
                                                        std::to_string(expected));
    }
    std::vector<int> labels;
    labels.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = trim(lines[i]);
        if (t == "0") {
            labels.push_back(0);
        } else if (t == "1") {
            labels.push_back(1);
        } else {
            throw IoError(IoErrc::bad_label, path.string() + " line " + std::to_string(i + 1));
        }
    }
    return labels;
}

ActivationSet read_avec(const fs::path& path, const std::optional<fs::path>& labels_path) {
    const auto bytes = read_bytes(path);
    Matrix data = decode_avec(bytes);
    std::optional<std::vector<int>> labels;
    const fs::path sidecar = labels_path.value_or(labels_sidecar(path));
    if (labels_path || fs::exists(sidecar)) {
        labels = read_labels(sidecar, static_cast<std::size_t>(data.rows()));
    }
    ActivationMeta meta;
    meta.source = path.filename().string();
    return ActivationSet(std::move(data), std::move(labels), std::move(meta));
}

void write_avec(const ActivationSet& set, const fs::path& path) {
    const auto bytes = encode_avec(set.data());
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError(IoErrc::write_failed, path.string());
        }
    }
    if (set.labels()) {
        std::string text;
        for (int l : *set.labels()) {
            text += l == 1 ? "1\n" : "0\n";
        }
        write_text(text, labels_sidecar(path));
    }
}

ActivationSet read_activations_csv(const fs::path& path) {
    const auto lines = lines_of(read_string(path));
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        std::vector<double> row;
        for (const auto& cell : cells) {
            const auto v = parse_double(cell);
            if (!v) {
                if (i == 0 && rows.empty()) {
                    row.clear();
                    break;  // header line
                }
                throw IoError(IoErrc::parse_error,
                              path.string() + " line " + std::to_string(i + 1));
            }
            if (!std::isfinite(*v)) {
                throw IoError(IoErrc::non_finite, path.string() + " line " + std::to_string(i + 1));
            }
            row.push_back(*v);
        }
        if (row.empty()) {
            continue;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw IoError(IoErrc::parse_error,
                          path.string() + " line " + std::to_string(i + 1) + ": ragged row");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw IoError(IoErrc::empty_shape, path.string() + " has no data rows");
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    ActivationMeta meta;
    meta.source = path.filename().string();
    return ActivationSet(std::move(m), std::nullopt, std::move(meta));
}

ActivationSet read_activations(const fs::path& path) {
    if (path.extension() == ".csv") {
        return read_activations_csv(path);
    }
    return read_avec(path);
}

// --- head ---------------------------------------------------------------

json head_to_json(const HeadFile& head) {
    json j;
    j["dim"] = head.head.dim();
    j["weights"] = vector_json(head.head.weights());
    j["bias"] = head.head.bias();
    if (head.thresholds) {
        j["thresholds"] = {{"tau_star", head.thresholds->tau_star},
                           {"tau_pess", head.thresholds->tau_pess}};
    }
    j["model_tag"] = head.model_tag;
    return j;
}

HeadFile head_from_json(const json& doc) {
    const std::string root = "head";
    const long dim = as_integer(need(doc, "dim", root), root + ".dim");
    if (dim < 1) {
        schema_fail(root + ".dim", "must be positive");
    }
    Vector w = as_vector(need(doc, "weights", root), root + ".weights", dim);
    const double bias = as_number(need(doc, "bias", root), root + ".bias");
    std::optional<Thresholds> thresholds;
    if (doc.contains("thresholds") && !doc["thresholds"].is_null()) {
        const json& t = doc["thresholds"];
        const std::string tp = root + ".thresholds";
        Thresholds th{as_number(need(t, "tau_star", tp), tp + ".tau_star"),
                      as_number(need(t, "tau_pess", tp), tp + ".tau_pess")};
        for (auto [v, name] : {std::pair{th.tau_star, ".tau_star"}, {th.tau_pess, ".tau_pess"}}) {
            if (!(v > 0.0 && v < 1.0)) {
                schema_fail(tp + name, "must lie in (0, 1)");
            }
        }
        thresholds = th;
    }
    std::string tag;
    if (doc.contains("model_tag")) {
        tag = as_string(doc["model_tag"], root + ".model_tag");
    }
    return HeadFile{ClassifierHead(std::move(w), bias), thresholds, std::move(tag)};
}

HeadFile read_head(const fs::path& path) { return head_from_json(read_json(path)); }

void write_head(const HeadFile& head, const fs::path& path) {
    write_json(head_to_json(head), path);
}

// --- specs --------------------------------------------------------------

std::string_view spec_kind(const Spec& spec) {
    switch (spec.index()) {
        case 0: return "single-rect";
        case 1: return "multi-rect";
        default: return "gmm";
    }
}

Eigen::Index spec_dim(const Spec& spec) {
    return std::visit([](const auto& s) { return s.dim(); }, spec);
}

json spec_to_json(const Spec& spec) {
    json j;
    j["kind"] = std::string(spec_kind(spec));
    j["dim"] = spec_dim(spec);
    if (const auto* rect = std::get_if<RectSpec>(&spec)) {
        j["rect"] = rect_json(*rect);
    } else if (const auto* multi = std::get_if<MultiRectSpec>(&spec)) {
        j["clustering"] = {{"min_cluster_size", multi->clustering.min_cluster_size},
                           {"metric", multi->clustering.metric}};
        j["noise_count"] = multi->noise_count;
        j["labels"] = multi->labels;
        json rects = json::array();
        for (const auto& r : multi->rects) {
            rects.push_back(rect_json(r));
        }
        j["rects"] = std::move(rects);
    } else {
        const auto& g = std::get<GmmSpec>(spec);
        j["components"] = g.components();
        j["covariance_kind"] = std::string(to_string(g.kind));
        j["weights"] = vector_json(g.weights);
        j["means"] = matrix_json(g.means);
        if (g.kind == CovarianceKind::full) {
            json covs = json::array();
            for (const auto& c : g.covariances) {
                covs.push_back(matrix_json(c));
            }
            j["covariances"] = std::move(covs);
        } else {
            j["variances"] = matrix_json(g.variances);
        }
        j["density_boundary"] = g.density_boundary ? json(*g.density_boundary) : json(nullptr);
        j["boundary_low_confidence"] = g.boundary_low_confidence;
    }
    return j;
}

Spec spec_from_json(const json& doc) {
    const std::string root = "spec";
    const std::string kind = as_string(need(doc, "kind", root), root + ".kind");
    const long d = as_integer(need(doc, "dim", root), root + ".dim");
    if (d < 1) {
        schema_fail(root + ".dim", "must be positive");
    }
    if (kind == "single-rect") {
        return rect_from_json(need(doc, "rect", root), root + ".rect", d);
    }
    if (kind == "multi-rect") {
        MultiRectSpec multi;
        const json& cl = need(doc, "clustering", root);
        multi.clustering.min_cluster_size = static_cast<int>(
            as_integer(need(cl, "min_cluster_size", root + ".clustering"),
                       root + ".clustering.min_cluster_size"));
        multi.clustering.metric =
            as_string(need(cl, "metric", root + ".clustering"), root + ".clustering.metric");
        multi.noise_count = as_integer(need(doc, "noise_count", root), root + ".noise_count");
        if (doc.contains("labels")) {
            const json& labels = doc["labels"];
            if (!labels.is_array()) {
                schema_fail(root + ".labels", "expected array");
            }
            for (std::size_t i = 0; i < labels.size(); ++i) {
                multi.labels.push_back(static_cast<int>(
                    as_integer(labels[i], root + ".labels[" + std::to_string(i) + "]")));
            }
        }
        const json& rects = need(doc, "rects", root);
        if (!rects.is_array() || rects.empty()) {
            schema_fail(root + ".rects", "expected non-empty array");
        }
        for (std::size_t i = 0; i < rects.size(); ++i) {
            multi.rects.push_back(
                rect_from_json(rects[i], root + ".rects[" + std::to_string(i) + "]", d));
        }
        return multi;
    }
    if (kind == "gmm") {
        GmmSpec g;
        const long k = as_integer(need(doc, "components", root), root + ".components");
        if (k < 1) {
            schema_fail(root + ".components", "must be positive");
        }
        try {
            g.kind = parse_covariance_kind(
                as_string(need(doc, "covariance_kind", root), root + ".covariance_kind"));
        } catch (const DomainError& e) {
            schema_fail(root + ".covariance_kind", e.what());
        }
        g.weights = as_vector(need(doc, "weights", root), root + ".weights", k);
        g.means = as_matrix(need(doc, "means", root), root + ".means", k, d);
        if (g.kind == CovarianceKind::full) {
            const json& covs = need(doc, "covariances", root);
            if (!covs.is_array() || static_cast<long>(covs.size()) != k) {
                schema_fail(root + ".covariances", "expected " + std::to_string(k) + " matrices");
            }
            for (std::size_t c = 0; c < covs.size(); ++c) {
                g.covariances.push_back(
                    as_matrix(covs[c], root + ".covariances[" + std::to_string(c) + "]", d, d));
            }
        } else {
            g.variances = as_matrix(need(doc, "variances", root), root + ".variances", k, d);
        }
        const json& boundary = need(doc, "density_boundary", root);
        if (!boundary.is_null()) {
            g.density_boundary = as_number(boundary, root + ".density_boundary");
        }
        if (doc.contains("boundary_low_confidence")) {
            const json& lc = doc["boundary_low_confidence"];
            if (!lc.is_boolean()) {
                schema_fail(root + ".boundary_low_confidence", "expected boolean");
            }
            g.boundary_low_confidence = lc.get<bool>();
        }
        try {
            validate_gmm(g);
        } catch (const Error& e) {
            schema_fail(root, e.what());
        }
        return g;
    }
    schema_fail(root + ".kind", "unknown kind '" + kind + "'");
}

Spec read_spec(const fs::path& path) { return spec_from_json(read_json(path)); }

void write_spec(const Spec& spec, const fs::path& path) { write_json(spec_to_json(spec), path); }

// --- reports ------------------------------------------------------------

json spec_parameters(const Spec& spec) {
    json p = json::object();
    if (const auto* rect = std::get_if<RectSpec>(&spec)) {
        p["rects"] = 1;
        p["member_count"] = rect->member_count;
    } else if (const auto* multi = std::get_if<MultiRectSpec>(&spec)) {
        p["rects"] = multi->rects.size();
        p["min_cluster_size"] = multi->clustering.min_cluster_size;
        p["metric"] = multi->clustering.metric;
        p["noise_count"] = multi->noise_count;
    } else {
        const auto& g = std::get<GmmSpec>(spec);
        p["components"] = g.components();
        p["covariance_kind"] = std::string(to_string(g.kind));
        p["density_boundary"] = g.density_boundary ? json(*g.density_boundary) : json(nullptr);
    }
    p["dim"] = spec_dim(spec);
    return p;
}

json exact_report(const Spec& spec, const MultiCertificate& cert, const ReportContext& ctx) {
    const double tau = cert.rects.empty() ? 0.0 : cert.rects.front().tau;
    json j = report_header(spec, tau, ctx);
    j["verdict"] = std::string(to_string(cert.aggregate));
    j["min_margin"] = cert.min_margin;
    json certs = json::array();
    const auto* multi = std::get_if<MultiRectSpec>(&spec);
    for (const auto& c : cert.rects) {
        std::optional<int> cluster;
        if (multi) {
            cluster = multi->rects[static_cast<std::size_t>(c.rect_index)].cluster_id;
        }
        certs.push_back(certificate_json(c, cluster));
    }
    j["certificates"] = std::move(certs);
    // Margins and witnesses go beyond a bare SAT/UNSAT verdict.
    j["extensions"] = {"margin", "witness"};
    return j;
}

json gmm_report(const Spec& spec, const ProbCertificate& cert, const ReportContext& ctx) {
    json j = report_header(spec, cert.tau, ctx);
    j["logit_threshold"] = cert.logit_threshold;
    j["total_coverage"] = cert.total;
    json comps = json::array();
    for (const auto& c : cert.per_component) {
        comps.push_back({{"weight", c.weight}, {"mu_z", c.mu_z}, {"sigma_z", c.sigma_z}, {"p", c.p}});
    }
    j["components"] = std::move(comps);
    if (ctx.min_coverage) {
        j["min_coverage"] = *ctx.min_coverage;
        j["coverage_gate"] = cert.total >= *ctx.min_coverage ? "pass" : "fail";
    } else {
        j["min_coverage"] = nullptr;
        j["coverage_gate"] = "none";
    }
    return j;
}

json fidelity_report(const Spec& spec, const FidelityReport& r) {
    json j;
    j["tool"] = std::string(kToolName);
    j["version"] = std::string(kToolVersion);
    j["spec_kind"] = std::string(spec_kind(spec));
    j["spec_params"] = spec_parameters(spec);
    j["true_pos"] = r.true_pos;
    j["false_pos"] = r.false_pos;
    j["true_neg"] = r.true_neg;
    j["false_neg"] = r.false_neg;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["precision_undefined"] = r.precision_undefined;
    j["recall_undefined"] = r.recall_undefined;
    return j;
}

std::vector<std::string> validate_report(const json& report) {
    std::vector<std::string> errors;
    auto check = [&](const json& obj, const std::string& path, const char* key, auto pred,
                     const char* expected) {
        if (!obj.is_object() || !obj.contains(key)) {
            errors.push_back(path + "." + key + ": missing field");
            return false;
        }
        if (!pred(obj[key])) {
            errors.push_back(path + "." + key + ": expected " + expected);
            return false;
        }
        return true;
    };
    const auto is_num = [](const json& v) { return v.is_number(); };
    const auto is_str = [](const json& v) { return v.is_string(); };
    const auto is_obj = [](const json& v) { return v.is_object(); };
    const auto is_arr = [](const json& v) { return v.is_array(); };
    const auto is_num_arr = [](const json& v) {
        return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
    };
    const auto is_verdict = [](const json& v) {
        return v.is_string() && (v == "SAT" || v == "UNSAT");
    };
    const auto is_tau = [](const json& v) {
        return v.is_number() && v.get<double>() > 0.0 && v.get<double>() < 1.0;
    };
    const std::string root = "report";

    if (!report.is_object()) {
        return {root + ": expected object"};
    }
    check(report, root, "tool", [](const json& v) { return v == std::string(kToolName); },
          "\"guardcert\"");
    check(report, root, "version", is_str, "string");
    check(report, root, "spec_params", is_obj, "object");
    check(report, root, "tau", is_tau, "number in (0, 1)");
    check(report, root, "tau_source", [](const json& v) {
        return v.is_string() && (v == "literal" || v == "star" || v == "pess");
    }, "one of literal|star|pess");
    if (!check(report, root, "spec_kind", [](const json& v) {
            return v.is_string() && (v == "single-rect" || v == "multi-rect" || v == "gmm");
        }, "one of single-rect|multi-rect|gmm")) {
        return errors;
    }

    if (report["spec_kind"] == "gmm") {
        check(report, root, "logit_threshold", is_num, "number");
        check(report, root, "total_coverage",
              [](const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; },
              "number in [0, 1]");
        check(report, root, "coverage_gate", [](const json& v) {
            return v.is_string() && (v == "pass" || v == "fail" || v == "none");
        }, "one of pass|fail|none");
        if (check(report, root, "components", is_arr, "array")) {
            const json& comps = report["components"];
            if (comps.empty()) {
                errors.push_back(root + ".components: expected at least one component");
            }
            for (std::size_t i = 0; i < comps.size(); ++i) {
                const std::string p = root + ".components[" + std::to_string(i) + "]";
                for (const char* key : {"weight", "mu_z", "sigma_z", "p"}) {
                    check(comps[i], p, key, is_num, "number");
                }
            }
        }
        return errors;
    }

    check(report, root, "verdict", is_verdict, "SAT or UNSAT");
    check(report, root, "min_margin", is_num, "number");
    check(report, root, "extensions", is_arr, "array");
    if (check(report, root, "certificates", is_arr, "array")) {
        const json& certs = report["certificates"];
        if (certs.empty()) {
            errors.push_back(root + ".certificates: expected at least one certificate");
        }
        bool any_sat = false;
        for (std::size_t i = 0; i < certs.size(); ++i) {
            const std::string p = root + ".certificates[" + std::to_string(i) + "]";
            check(certs[i], p, "rect_index", [](const json& v) { return v.is_number_integer(); },
                  "integer");
            if (check(certs[i], p, "verdict", is_verdict, "SAT or UNSAT")) {
                any_sat = any_sat || certs[i]["verdict"] == "SAT";
            }
            for (const char* key : {"z_min", "score_min", "tau", "margin"}) {
                check(certs[i], p, key, is_num, "number");
            }
            check(certs[i], p, "witness_rotated", is_num_arr, "array of numbers");
            check(certs[i], p, "witness_original", is_num_arr, "array of numbers");
        }
        if (report.contains("verdict") && is_verdict(report["verdict"]) &&
            (report["verdict"] == "SAT") != any_sat) {
            errors.push_back(root + ".verdict: inconsistent with per-rectangle verdicts");
        }
    }
    return errors;
}

json read_json(const fs::path& path) {
    const std::string text = read_string(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(IoErrc::parse_error, path.string() + ": " + e.what());
    }
}

void write_json(const json& doc, const fs::path& path) {
    write_text(doc.dump(2) + "\n", path);
}

// --- CSV ----------------------------------------------------------------

std::string format_number(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw Error("cannot format number");
    }
    return std::string(buf, ptr);
}

ScoreTable read_scores_csv(const fs::path& path) {
    const auto lines = lines_of(read_string(path));
    ScoreTable table;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cells = split(lines[i], ',');
        const std::string where = path.string() + " line " + std::to_string(i + 1);
        if (cells.size() != 2) {
            throw IoError(IoErrc::parse_error, where + ": expected 2 columns (score,label)");
        }
        const auto score = parse_double(cells[0]);
        if (!score) {
            if (i == 0 && trim(cells[0]) == "score") {
                continue;
            }
            throw IoError(IoErrc::parse_error, where + ": bad score");
        }
        if (!std::isfinite(*score)) {
            throw IoError(IoErrc::non_finite, where);
        }
        const auto label = trim(cells[1]);
        if (label != "0" && label != "1") {
            throw IoError(IoErrc::bad_label, where);
        }
        table.scores.push_back(*score);
        table.labels.push_back(label == "1" ? 1 : 0);
    }
    if (table.scores.empty()) {
        throw IoError(IoErrc::empty_shape, path.string() + " has no scores");
    }
    return table;
}

std::string roc_csv(const RocAnalysis& analysis, double tau_pess) {
    std::string out;
    out += "# tau_star=" + format_number(analysis.tau_star) + "\n";
    out += "# tau_pess=" + format_number(tau_pess) + "\n";
    out += "# auc=" + format_number(analysis.auc) + "\n";
    out += "# youden_j=" + format_number(analysis.youden_j) + "\n";
    out += "threshold,fpr,tpr\n";
    for (const auto& p : analysis.points) {
        out += format_number(p.threshold) + "," + format_number(p.fpr) + "," +
               format_number(p.tpr) + "\n";
    }
    return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "param,precision,recall,f1,clusters,flagged,note\n";
    for (const auto& r : rows) {
        out += std::to_string(r.param) + "," + format_number(r.report.precision) + "," +
               format_number(r.report.recall) + "," + format_number(r.report.f1) + "," +
               std::to_string(r.clusters) + "," + (r.flagged ? "1" : "0") + "," + r.note + "\n";
    }
    return out;
}

void write_text(const std::string& text, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw IoError(IoErrc::write_failed, path.string());
    }
}

}  // namespace guardcert::io
