#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "guardcert/core.hpp"
#include "guardcert/gmm.hpp"
#include "guardcert/metrics.hpp"
#include "guardcert/regions_rect.hpp"
#include "guardcert/verify_exact.hpp"

namespace guardcert::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::string_view kToolName = "guardcert";
inline constexpr std::string_view kToolVersion = "0.1.0";

enum class IoErrc {
    open_failed,
    write_failed,
    truncated_header,
    bad_magic,
    version_mismatch,
    unsupported_dtype,
    empty_shape,
    truncated_payload,
    trailing_bytes,
    non_finite,
    label_count_mismatch,
    bad_label,
    parse_error,
    schema_violation,
};

std::string_view to_string(IoErrc code);

class IoError : public Error {
public:
    IoError(IoErrc code, const std::string& message)
        : Error(std::string(to_string(code)) + ": " + message), code_(code) {}

    IoErrc code() const { return code_; }

private:
    IoErrc code_;
};

// --- AVEC activation matrices -------------------------------------------
//
// Layout (little-endian):
//   "AVEC" | u8 version = 1 | u32 n | u32 d | u8 dtype = 1 (float32) |
//   n * d float32, row-major
// Labels live in an optional text sidecar `<file>.labels`, one 0/1 per line.

inline constexpr std::uint8_t kAvecVersion = 1;
inline constexpr std::uint8_t kAvecFloat32 = 1;
inline constexpr std::size_t kAvecHeaderSize = 14;

std::vector<std::uint8_t> encode_avec(const Matrix& data);
Matrix decode_avec(std::span<const std::uint8_t> bytes);

fs::path labels_sidecar(const fs::path& avec_path);

/// Reads `path`; labels come from `labels_path` if given, otherwise from the
/// default sidecar when it exists.
ActivationSet read_avec(const fs::path& path, const std::optional<fs::path>& labels_path = {});
void write_avec(const ActivationSet& set, const fs::path& path);

std::vector<int> read_labels(const fs::path& path, std::size_t expected);

/// Comma-separated rows of numbers, for small fixtures.
ActivationSet read_activations_csv(const fs::path& path);

/// Dispatches on extension: `.csv` is text, anything else AVEC.
ActivationSet read_activations(const fs::path& path);

// --- classifier head ----------------------------------------------------

struct HeadFile {
    ClassifierHead head;
    std::optional<Thresholds> thresholds;
    std::string model_tag;
};

json head_to_json(const HeadFile& head);
HeadFile head_from_json(const json& doc);
HeadFile read_head(const fs::path& path);
void write_head(const HeadFile& head, const fs::path& path);

// --- specifications -----------------------------------------------------

using Spec = std::variant<RectSpec, MultiRectSpec, GmmSpec>;

std::string_view spec_kind(const Spec& spec);
Eigen::Index spec_dim(const Spec& spec);

json spec_to_json(const Spec& spec);
Spec spec_from_json(const json& doc);
Spec read_spec(const fs::path& path);
void write_spec(const Spec& spec, const fs::path& path);

// --- reports ------------------------------------------------------------

struct ReportContext {
    std::string tau_source;  ///< "literal", "star" or "pess"
    std::optional<double> min_coverage;
};

json spec_parameters(const Spec& spec);
json exact_report(const Spec& spec, const MultiCertificate& cert, const ReportContext& ctx);
json gmm_report(const Spec& spec, const ProbCertificate& cert, const ReportContext& ctx);
json fidelity_report(const Spec& spec, const FidelityReport& report);

/// Structural check of a verification report; returns one message per
/// violation, each naming the offending field path.
std::vector<std::string> validate_report(const json& report);

json read_json(const fs::path& path);
void write_json(const json& doc, const fs::path& path);

// --- CSV ----------------------------------------------------------------

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

struct ScoreTable {
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Columns `score,label`; an optional header line is skipped.
ScoreTable read_scores_csv(const fs::path& path);

/// Header block (`# key=value` lines) followed by `threshold,fpr,tpr` rows.
std::string roc_csv(const RocAnalysis& analysis, double tau_pess);
std::string sweep_csv(const std::vector<SweepRow>& rows);

void write_text(const std::string& text, const fs::path& path);

}  // namespace guardcert::io
