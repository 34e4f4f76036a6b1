#include "memcol/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "memcol/dataset.hpp"
#include "memcol/errors.hpp"

namespace memcol {

namespace {

constexpr const char* kReportFormat = "memory-colors-report/1";

const std::set<std::string>& adapter_modes() {
    static const std::set<std::string> modes = {"implicit", "explicit", "images"};
    return modes;
}

}  // namespace

Color argmax_color(const ColorScores& dist) {
    for (std::size_t i = 0; i < kColorCount; ++i)
        if (!std::isfinite(dist.scores[i]))
            throw ScoringError("non-finite score for \"" + std::string(kColorNames[i]) + "\"");
    std::size_t best = 0;
    for (std::size_t i = 1; i < kColorCount; ++i)
        if (dist.scores[i] > dist.scores[best]) best = i;
    return static_cast<Color>(best);
}

bool score_query(const ColorScores& dist, Color gold) { return argmax_color(dist) == gold; }

EvalReport evaluate(const Backend& backend, const std::vector<ClozeQuery>& queries,
                    const std::string& backend_id,
                    const std::map<std::string, std::string>& config) {
    if (!backend) throw ConfigError("evaluate needs a backend");
    if (queries.empty()) throw ConfigError("evaluate needs at least one query");

    EvalReport r;
    r.backend = backend_id;
    r.config = config;

    std::map<int, std::pair<int, int>> tally;  // template id -> (correct, total)
    for (const ClozeQuery& q : queries) {
        Color predicted = Color::black;
        try {
            predicted = argmax_color(backend(q));
        } catch (const std::exception& e) {
            throw ScoringError("query " + q.id() + ": " + e.what());
        }
        const bool ok = predicted == q.gold;
        auto& [correct, total] = tally[q.template_id];
        correct += ok ? 1 : 0;
        total += 1;
        r.per_item.push_back({q.id(), q.template_id, q.item_index, q.gold, predicted, ok});
    }

    std::sort(r.per_item.begin(), r.per_item.end(), [](const ItemResult& a, const ItemResult& b) {
        return std::tie(a.template_id, a.item_index) < std::tie(b.template_id, b.item_index);
    });
    for (std::size_t i = 1; i < r.per_item.size(); ++i)
        if (r.per_item[i - 1].template_id == r.per_item[i].template_id &&
            r.per_item[i - 1].item_index == r.per_item[i].item_index)
            throw ConfigError("duplicate query " + r.per_item[i].query_id);

    std::vector<double> accuracies;
    for (const auto& [tid, counts] : tally) {
        const double acc = static_cast<double>(counts.first) / counts.second;
        r.per_template[tid] = acc;
        accuracies.push_back(acc);
    }
    const MeanStd ms = mean_std(accuracies);
    r.mean = ms.mean;
    r.std = ms.std;
    return r;
}

// --- report files ------------------------------------------------------------

void save_report(const EvalReport& r, std::ostream& out) {
    nlohmann::ordered_json j;
    j["format"] = kReportFormat;
    j["backend"] = r.backend;
    j["config"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.config) j["config"][k] = v;
    j["mean"] = r.mean;
    j["std"] = r.std;
    j["per_template"] = nlohmann::ordered_json::object();
    for (const auto& [tid, acc] : r.per_template) j["per_template"][std::to_string(tid)] = acc;
    j["per_item"] = nlohmann::ordered_json::array();
    for (const ItemResult& it : r.per_item) {
        nlohmann::ordered_json e;
        e["query_id"] = it.query_id;
        e["template"] = it.template_id;
        e["item"] = it.item_index;
        e["gold"] = std::string(to_string(it.gold));
        e["predicted"] = std::string(to_string(it.predicted));
        e["correct"] = it.correct;
        j["per_item"].push_back(std::move(e));
    }
    out << j.dump(2) << '\n';
}

void save_report_file(const EvalReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write report file: " + path);
    save_report(r, out);
    out.flush();
    if (!out) throw ConfigError("failed writing report file: " + path);
}

namespace {

int parse_int_key(const std::string& key, const std::string& what,
                  const std::string& source_name) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), value);
    if (ec != std::errc() || ptr != key.data() + key.size() || value < 1)
        throw FormatError(source_name + ": " + what + " key \"" + key +
                          "\" is not a positive integer");
    return value;
}

Color parse_report_color(const nlohmann::json& v, const std::string& what,
                         const std::string& source_name) {
    if (!v.is_string()) throw FormatError(source_name + ": " + what + " must be a color string");
    const auto c = try_parse_color(v.get<std::string>());
    if (!c)
        throw FormatError(source_name + ": " + what + " \"" + v.get<std::string>() +
                          "\" is not one of the 11 colors");
    return *c;
}

}  // namespace

EvalReport load_report(std::istream& in, const std::string& source_name) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source_name + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw FormatError(source_name + ": expected a JSON object");

    static const std::set<std::string> kKeys = {"format", "backend",      "config",
                                                "mean",   "std",          "per_template",
                                                "per_item"};
    for (const auto& [k, v] : j.items())
        if (kKeys.count(k) == 0)
            throw FormatError(source_name + ": unexpected key \"" + k + "\"");
    for (const std::string& k : kKeys)
        if (!j.contains(k)) throw FormatError(source_name + ": missing key \"" + k + "\"");

    if (!j["format"].is_string() || j["format"].get<std::string>() != kReportFormat)
        throw FormatError(source_name + ": unsupported format tag, expected \"" +
                          std::string(kReportFormat) + "\"");
    if (!j["backend"].is_string())
        throw FormatError(source_name + ": backend must be a string");
    if (!j["config"].is_object())
        throw FormatError(source_name + ": config must be an object");
    if (!j["mean"].is_number() || !j["std"].is_number())
        throw FormatError(source_name + ": mean and std must be numbers");
    if (!j["per_template"].is_object())
        throw FormatError(source_name + ": per_template must be an object");
    if (!j["per_item"].is_array() || j["per_item"].empty())
        throw FormatError(source_name + ": per_item must be a non-empty array");

    EvalReport r;
    r.backend = j["backend"].get<std::string>();
    for (const auto& [k, v] : j["config"].items()) {
        if (!v.is_string())
            throw FormatError(source_name + ": config values must be strings");
        r.config[k] = v.get<std::string>();
    }
    for (const auto& [k, v] : j["per_template"].items()) {
        const int tid = parse_int_key(k, "per_template", source_name);
        if (!v.is_number())
            throw FormatError(source_name + ": per_template values must be numbers");
        const double acc = v.get<double>();
        if (!(acc >= 0.0 && acc <= 1.0))
            throw FormatError(source_name + ": accuracy for template " + k +
                              " is outside [0, 1]");
        r.per_template[tid] = acc;
    }
    if (r.per_template.empty())
        throw FormatError(source_name + ": per_template must not be empty");

    static const std::set<std::string> kItemKeys = {"query_id", "template", "item",
                                                    "gold",     "predicted", "correct"};
    for (const auto& e : j["per_item"]) {
        if (!e.is_object()) throw FormatError(source_name + ": per_item entries must be objects");
        for (const auto& [k, v] : e.items())
            if (kItemKeys.count(k) == 0)
                throw FormatError(source_name + ": unexpected per_item key \"" + k + "\"");
        for (const std::string& k : kItemKeys)
            if (!e.contains(k))
                throw FormatError(source_name + ": per_item entry missing \"" + k + "\"");
        ItemResult it;
        if (!e["query_id"].is_string() || e["query_id"].get<std::string>().empty())
            throw FormatError(source_name + ": per_item query_id must be a non-empty string");
        it.query_id = e["query_id"].get<std::string>();
        if (!e["template"].is_number_integer() || e["template"].get<int>() < 1)
            throw FormatError(source_name + ": per_item template must be a positive integer");
        it.template_id = e["template"].get<int>();
        if (!e["item"].is_number_integer() || e["item"].get<int>() < 1)
            throw FormatError(source_name + ": per_item item must be a positive integer");
        it.item_index = e["item"].get<int>();
        it.gold = parse_report_color(e["gold"], "gold", source_name);
        it.predicted = parse_report_color(e["predicted"], "predicted", source_name);
        if (!e["correct"].is_boolean())
            throw FormatError(source_name + ": per_item correct must be a boolean");
        it.correct = e["correct"].get<bool>();
        if (it.correct != (it.gold == it.predicted))
            throw FormatError(source_name + ": correct flag for " + it.query_id +
                              " contradicts gold vs predicted");
        r.per_item.push_back(std::move(it));
    }

    for (std::size_t i = 1; i < r.per_item.size(); ++i) {
        const auto& a = r.per_item[i - 1];
        const auto& b = r.per_item[i];
        if (std::tie(a.template_id, a.item_index) >= std::tie(b.template_id, b.item_index))
            throw FormatError(source_name + ": per_item must be sorted by (template, item) " +
                              "without duplicates");
    }

    // The stored aggregates must be recomputable from the breakdown.
    std::map<int, std::pair<int, int>> tally;
    for (const ItemResult& it : r.per_item) {
        auto& [correct, total] = tally[it.template_id];
        correct += it.correct ? 1 : 0;
        total += 1;
    }
    if (tally.size() != r.per_template.size())
        throw FormatError(source_name + ": per_item templates do not match per_template");
    std::vector<double> accuracies;
    for (const auto& [tid, counts] : tally) {
        const auto found = r.per_template.find(tid);
        if (found == r.per_template.end())
            throw FormatError(source_name + ": per_item template " + std::to_string(tid) +
                              " missing from per_template");
        const double acc = static_cast<double>(counts.first) / counts.second;
        if (std::abs(acc - found->second) > 1e-12)
            throw FormatError(source_name + ": stored accuracy for template " +
                              std::to_string(tid) + " does not match its per_item entries");
        accuracies.push_back(acc);
    }
    const MeanStd ms = mean_std(accuracies);
    r.mean = j["mean"].get<double>();
    r.std = j["std"].get<double>();
    if (std::abs(ms.mean - r.mean) > 1e-12 || std::abs(ms.std - r.std) > 1e-12)
        throw FormatError(source_name + ": stored mean/std do not match per_template entries");
    return r;
}

EvalReport load_report_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read report file: " + path);
    return load_report(in, path);
}

// --- adapter protocol --------------------------------------------------------

AdapterRequest adapter_request(const ClozeQuery& q, const std::string& mode) {
    if (adapter_modes().count(mode) == 0)
        throw ConfigError("unknown adapter mode \"" + mode + "\"");
    AdapterRequest r;
    r.query_id = q.id();
    r.text = q.text;
    r.mode = mode;
    return r;
}

void write_adapter_requests(std::ostream& out, const std::vector<AdapterRequest>& requests) {
    for (const AdapterRequest& r : requests) {
        if (r.query_id.empty()) throw ConfigError("adapter request with empty query_id");
        if (adapter_modes().count(r.mode) == 0)
            throw ConfigError("unknown adapter mode \"" + r.mode + "\" for " + r.query_id);
        nlohmann::ordered_json j;
        j["query_id"] = r.query_id;
        j["text"] = r.text;
        j["candidates"] = nlohmann::ordered_json::array();
        for (const auto& name : kColorNames) j["candidates"].push_back(std::string(name));
        j["mode"] = r.mode;
        if (r.image_ref) j["image_ref"] = *r.image_ref;
        if (r.visual_feature) j["visual_feature"] = *r.visual_feature;
        out << j.dump() << '\n';
    }
}

std::map<std::string, ColorScores> read_adapter_responses(
    std::istream& in, const std::vector<AdapterRequest>& requests,
    const std::string& source_name) {
    std::set<std::string> expected;
    for (const AdapterRequest& r : requests)
        if (!expected.insert(r.query_id).second)
            throw ProtocolError("duplicate request query_id \"" + r.query_id + "\"");

    std::map<std::string, ColorScores> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const std::string where = source_name + ":" + std::to_string(lineno);

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(where + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) throw ProtocolError(where + ": expected a JSON object");
        for (const auto& [k, v] : j.items())
            if (k != "query_id" && k != "scores")
                throw ProtocolError(where + ": unexpected key \"" + k + "\"");
        if (!j.contains("query_id") || !j["query_id"].is_string())
            throw ProtocolError(where + ": missing string query_id");
        const std::string id = j["query_id"].get<std::string>();
        if (expected.count(id) == 0)
            throw ProtocolError(where + ": unknown query_id \"" + id + "\"");
        if (out.count(id) > 0)
            throw ProtocolError(where + ": duplicate query_id \"" + id + "\"");
        if (!j.contains("scores") || !j["scores"].is_object())
            throw ProtocolError(where + ": missing scores object");

        const auto& scores = j["scores"];
        ColorScores cs;
        for (const auto& [k, v] : scores.items()) {
            const auto color = try_parse_color(k);
            if (!color)
                throw ProtocolError(where + ": score for unknown candidate \"" + k + "\"");
            if (!v.is_number())
                throw ProtocolError(where + ": score for \"" + k + "\" must be a number");
            const double value = v.get<double>();
            if (!std::isfinite(value))
                throw ProtocolError(where + ": score for \"" + k + "\" is not finite");
            cs[*color] = value;
        }
        for (const auto& name : kColorNames)
            if (!scores.contains(std::string(name)))
                throw ProtocolError(where + ": scores missing \"" + std::string(name) + "\"");
        out.emplace(id, cs);
    }

    if (out.size() != expected.size()) {
        for (const std::string& id : expected)
            if (out.count(id) == 0)
                throw ProtocolError(source_name + ": no response for query_id \"" + id + "\"");
    }
    return out;
}

std::map<std::string, ColorScores> run_adapter_command(
    const std::string& command, const std::vector<AdapterRequest>& requests) {
    if (command.empty()) throw ConfigError("adapter command is empty");

    std::ostringstream buffer;
    write_adapter_requests(buffer, requests);
    const std::string payload = buffer.str();

    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
    if (pipe(from_child) != 0) {
        close(to_child[0]);
        close(to_child[1]);
        throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
    }

    const pid_t pid = fork();
    if (pid < 0) {
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        throw ProtocolError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    // A child that exits early must surface through its status and the
    // missing responses, not kill this process on a broken pipe.
    signal(SIGPIPE, SIG_IGN);

    std::thread writer([&payload, fd = to_child[1]] {
        std::size_t off = 0;
        while (off < payload.size()) {
            const ssize_t n = ::write(fd, payload.data() + off, payload.size() - off);
            if (n <= 0) break;
            off += static_cast<std::size_t>(n);
        }
        ::close(fd);
    });

    std::string output;
    char buf[1 << 16];
    for (;;) {
        const ssize_t n = ::read(from_child[0], buf, sizeof buf);
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);
    writer.join();

    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFSIGNALED(status))
        throw ProtocolError("adapter command killed by signal " +
                            std::to_string(WTERMSIG(status)));
    if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
        throw ProtocolError("adapter command exited with status " +
                            std::to_string(WEXITSTATUS(status)));

    std::istringstream responses(output);
    return read_adapter_responses(responses, requests, "<adapter stdout>");
}

void write_adapter_requests_file(const std::string& path,
                                 const std::vector<AdapterRequest>& requests) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write adapter requests file: " + path);
    write_adapter_requests(out, requests);
    out.flush();
    if (!out) throw ConfigError("failed writing adapter requests file: " + path);
}

std::map<std::string, ColorScores> read_adapter_responses_file(
    const std::string& path, const std::vector<AdapterRequest>& requests) {
    std::ifstream in(path);
    if (!in) throw ProtocolError("cannot read adapter responses file: " + path);
    return read_adapter_responses(in, requests, path);
}

}  // namespace memcol
