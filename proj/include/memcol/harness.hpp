#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memcol/color.hpp"
#include "memcol/templates.hpp"

namespace memcol {

// Scores over the full color vocabulary, in vocabulary order. Logits and
// probabilities are equally acceptable; only the argmax matters for top-1.
struct ColorScores {
    std::array<double, kColorCount> scores{};

    double& operator[](Color c) { return scores[static_cast<std::size_t>(c)]; }
    double operator[](Color c) const { return scores[static_cast<std::size_t>(c)]; }
};

// Best-scoring color; ties break toward the lower vocabulary index.
// Throws ScoringError when any score is non-finite.
Color argmax_color(const ColorScores& dist);

// True iff the best-scoring color equals gold.
bool score_query(const ColorScores& dist, Color gold);

// A backend answers one cloze query with scores over the 11 colors.
using Backend = std::function<ColorScores(const ClozeQuery&)>;

struct ItemResult {
    std::string query_id;
    int template_id = 0;
    int item_index = 0;
    Color gold = Color::black;
    Color predicted = Color::black;
    bool correct = false;

    friend bool operator==(const ItemResult&, const ItemResult&) = default;
};

struct EvalReport {
    std::string backend;
    std::map<std::string, std::string> config;  // run settings echo
    std::map<int, double> per_template;         // template id -> accuracy
    std::vector<ItemResult> per_item;           // sorted by (template, item)
    double mean = 0.0;
    double std = 0.0;                           // sample std across templates

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Scores every query and aggregates top-1 accuracy per template, then mean
// and sample standard deviation across templates. Results do not depend on
// the order of the queries. A backend exception aborts the evaluation with
// the query id in the message; there are no partial reports.
EvalReport evaluate(const Backend& backend, const std::vector<ClozeQuery>& queries,
                    const std::string& backend_id,
                    const std::map<std::string, std::string>& config = {});

// --- report files ----------------------------------------------------------

// Versioned JSON ("memory-colors-report/1") with stable key order. Loading
// re-validates the report: accuracies in range, stored mean/std matching the
// per-template entries, per-item records consistent. Throws FormatError.
void save_report(const EvalReport& r, std::ostream& out);
void save_report_file(const EvalReport& r, const std::string& path);
EvalReport load_report(std::istream& in, const std::string& source_name = "<report>");
EvalReport load_report_file(const std::string& path);

// --- adapter protocol --------------------------------------------------------

// One evaluation query on the wire. The candidate list is implied: always
// the 11 colors in vocabulary order.
struct AdapterRequest {
    std::string query_id;
    std::string text;
    std::string mode;  // "implicit" | "explicit" | "images"
    std::optional<std::string> image_ref;
    std::optional<std::vector<double>> visual_feature;
};

AdapterRequest adapter_request(const ClozeQuery& q, const std::string& mode);

// One JSON object per line: {"query_id", "text", "candidates", "mode",
// "image_ref"?, "visual_feature"?}.
void write_adapter_requests(std::ostream& out, const std::vector<AdapterRequest>& requests);

// Parses response lines {"query_id", "scores"} and matches them to the
// requests by query_id, in any order. Strict: scores must cover exactly the
// 11 candidate colors, no extra keys anywhere, no duplicate or unknown or
// missing ids. Throws ProtocolError naming the line or id.
std::map<std::string, ColorScores> read_adapter_responses(
    std::istream& in, const std::vector<AdapterRequest>& requests,
    const std::string& source_name = "<responses>");

// Runs `command` through the shell, streaming the requests to its stdin
// while collecting its stdout, then validates the responses as above.
// Throws ProtocolError when the child fails or the protocol is violated.
std::map<std::string, ColorScores> run_adapter_command(
    const std::string& command, const std::vector<AdapterRequest>& requests);

// File-pair transport: persists requests for an out-of-process backend and
// validates its response file against them.
void write_adapter_requests_file(const std::string& path,
                                 const std::vector<AdapterRequest>& requests);
std::map<std::string, ColorScores> read_adapter_responses_file(
    const std::string& path, const std::vector<AdapterRequest>& requests);

}  // namespace memcol
