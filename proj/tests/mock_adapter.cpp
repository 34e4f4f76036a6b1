// Stand-in adapter for protocol tests: reads request lines on stdin and
// answers each with deterministic scores. Flags make it misbehave in
// specific ways so the strict reader can be exercised.
//
//   --color NAME       score 1.0 for NAME and 0.0 for the rest
//   --drop ID          emit no response for the given query_id
//   --dup ID           emit the response for the given query_id twice
//   --extra-key        add a 12th score entry ("beige")
//   --stray-field      add an unexpected top-level field
//   --malformed-line   emit one unparsable line first
//   --exit CODE        exit with CODE after answering everything

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "json.hpp"

namespace {

const char* kColors[] = {"black", "blue",   "brown", "green", "grey", "orange",
                         "pink",  "purple", "red",   "white", "yellow"};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

int main(int argc, char** argv) {
    std::string fixed_color;
    std::string drop_id;
    std::string dup_id;
    bool extra_key = false;
    bool stray_field = false;
    bool malformed_line = false;
    int exit_code = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--color" && i + 1 < argc) fixed_color = argv[++i];
        else if (arg == "--drop" && i + 1 < argc) drop_id = argv[++i];
        else if (arg == "--dup" && i + 1 < argc) dup_id = argv[++i];
        else if (arg == "--extra-key") extra_key = true;
        else if (arg == "--stray-field") stray_field = true;
        else if (arg == "--malformed-line") malformed_line = true;
        else if (arg == "--exit" && i + 1 < argc) exit_code = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "mock_adapter: unknown argument %s\n", arg.c_str());
            return 64;
        }
    }

    if (malformed_line) std::cout << "this is not json\n";

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        nlohmann::json req;
        try {
            req = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            std::fprintf(stderr, "mock_adapter: bad request: %s\n", e.what());
            return 65;
        }
        const std::string id = req.at("query_id").get<std::string>();
        if (id == drop_id) continue;

        nlohmann::ordered_json resp;
        resp["query_id"] = id;
        nlohmann::ordered_json scores;
        for (const char* color : kColors) {
            double value;
            if (!fixed_color.empty()) {
                value = (fixed_color == color) ? 1.0 : 0.0;
            } else {
                value = static_cast<double>(fnv1a(id + ":" + color) % 10000) / 10000.0;
            }
            scores[color] = value;
        }
        if (extra_key) scores["beige"] = 0.5;
        resp["scores"] = scores;
        if (stray_field) resp["note"] = "hello";
        std::cout << resp.dump() << '\n';
        if (id == dup_id) std::cout << resp.dump() << '\n';
    }
    std::cout.flush();
    return exit_code;
}
