#include "dataset.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "rng.hpp"
#include "sha256.hpp"
#include "tokenizer.hpp"

namespace fs = std::filesystem;

namespace lsi {

std::string snippet_content_id(const std::string &content) {
    return Sha256::hex(content.data(), content.size()).substr(0, 16);
}

std::vector<CodeSnippet> ingest_corpus(const std::string &root, const std::string &extension) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        fail(ErrorCode::io, "corpus root is not a readable directory: " + root);
    }

    std::vector<std::string> paths;
    for (auto it = fs::recursive_directory_iterator(root, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) fail(ErrorCode::io, "cannot walk corpus root " + root + ": " + ec.message());
        if (!it->is_regular_file()) continue;
        std::string p = it->path().generic_string();
        if (p.size() >= extension.size() &&
            p.compare(p.size() - extension.size(), extension.size(), extension) == 0) {
            paths.push_back(p);
        }
    }
    std::sort(paths.begin(), paths.end());

    std::vector<CodeSnippet> snippets;
    std::set<std::string> seen;
    for (const std::string &p : paths) {
        std::ifstream in(p, std::ios::binary);
        if (!in) fail(ErrorCode::io, "cannot read corpus file: " + p);
        std::ostringstream content;
        content << in.rdbuf();
        std::string text = content.str();
        if (text.empty()) continue;
        std::string id = snippet_content_id(text);
        if (!seen.insert(id).second) continue; // duplicate content
        snippets.push_back({id, p, std::move(text)});
    }
    if (snippets.empty()) {
        fail(ErrorCode::io,
             "corpus at " + root + " contains no non-empty *" + extension + " files");
    }
    return snippets;
}

std::vector<CodeSnippet> sample_snippets(const std::vector<CodeSnippet> &snippets, size_t n,
                                         uint64_t seed) {
    if (n > snippets.size()) {
        fail(ErrorCode::invalid_argument, "cannot sample " + std::to_string(n) + " snippets from " +
                                              std::to_string(snippets.size()));
    }
    std::vector<size_t> idx(snippets.size());
    for (size_t i = 0; i < idx.size(); i++) idx[i] = i;
    Rng rng(seed);
    std::vector<CodeSnippet> out;
    out.reserve(n);
    for (size_t i = 0; i < n; i++) {
        size_t j = i + static_cast<size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(snippets[idx[i]]);
    }
    return out;
}

const char *pair_origin_name(PairOrigin origin) {
    switch (origin) {
    case PairOrigin::generated: return "generated";
    case PairOrigin::evolved: return "evolved";
    case PairOrigin::manual: return "manual";
    }
    return "?";
}

PairOrigin pair_origin_from(const std::string &name) {
    if (name == "generated") return PairOrigin::generated;
    if (name == "evolved") return PairOrigin::evolved;
    if (name == "manual") return PairOrigin::manual;
    fail(ErrorCode::parse, "unknown pair origin: " + name);
}

std::string self_instruct_prompt(const std::string &code) {
    return "You are given a TypeScript code snippet. Write one clear natural-language "
           "instruction that would lead a developer to produce exactly this code, including a "
           "request to explain how it works. Reply with the instruction text only.\n\nCode:\n" +
           code;
}

std::string evolve_prompt(const std::string &instruction) {
    return "Rewrite the instruction below into a more complex variant that adds at least one "
           "concrete constraint or requirement while staying answerable with TypeScript code. "
           "Reply with the rewritten instruction only.\n\nInstruction:\n" +
           instruction;
}

std::vector<InstructionPair> generate_pairs(const CodeSnippet &snippet, GenClient &client) {
    std::string direct = client.complete(self_instruct_prompt(snippet.content), 256);
    std::string evolved = client.complete(evolve_prompt(direct), 256);
    return {
        {direct, snippet.content, PairOrigin::generated, snippet.id},
        {evolved, snippet.content, PairOrigin::evolved, snippet.id},
    };
}

namespace {

bool is_blank(const std::string &s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const char *kCodeKeywords[] = {"import ", "export ",    "const ", "let ",  "var ",
                               "function ", "class ",   "interface ", "enum ", "return ",
                               "if ",       "if(",      "for ",   "for(",  "while ",
                               "while(",    "type ",    "def ",   "print", "assert "};

} // namespace

bool looks_like_code(const std::string &text) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.erase(0, 1);
        if (line.empty()) continue;
        if (line.find('=') != std::string::npos) return true;
        if (!line.empty() && (line.back() == ';' || line.back() == '{' || line.back() == '}')) {
            return true;
        }
        for (const char *kw : kCodeKeywords) {
            if (line.rfind(kw, 0) == 0) return true;
        }
    }
    return false;
}

FilterResult filter_and_truncate(const std::vector<InstructionPair> &pairs) {
    FilterResult result;
    std::set<std::string> seen;
    for (const InstructionPair &pair : pairs) {
        if (pair.instruction.empty() || is_blank(pair.instruction)) {
            result.dropped.push_back({"empty-instruction", pair.instruction});
            continue;
        }
        if (pair.output.empty() || is_blank(pair.output)) {
            result.dropped.push_back({"empty-output", pair.instruction});
            continue;
        }
        if (!looks_like_code(pair.output)) {
            result.dropped.push_back({"no-code-content", pair.instruction});
            continue;
        }
        std::string key = pair.instruction + '\x1f' + pair.output;
        if (!seen.insert(Sha256::hex(key.data(), key.size())).second) {
            result.dropped.push_back({"duplicate", pair.instruction});
            continue;
        }
        InstructionPair kept = pair;
        std::vector<int> ids = tok::encode(kept.output);
        if (ids.size() > kMaxOutputTokens) {
            kept.output = tok::decode(tok::truncate(std::move(ids), kMaxOutputTokens));
        }
        result.pairs.push_back(std::move(kept));
    }
    return result;
}

void write_jsonl(const std::vector<InstructionPair> &pairs, const std::string &path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write dataset file: " + path);
    for (const InstructionPair &pair : pairs) {
        nlohmann::json record = {
            {"instruction", pair.instruction},
            {"output", pair.output},
            {"origin", pair_origin_name(pair.origin)},
            {"snippet_id", pair.snippet_id},
        };
        out << record.dump() << "\n";
    }
    if (!out) fail(ErrorCode::io, "write failed for dataset file: " + path);
}

std::vector<InstructionPair> read_jsonl(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open dataset file: " + path);
    std::vector<InstructionPair> pairs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
            InstructionPair pair;
            pair.instruction = record.at("instruction").get<std::string>();
            pair.output = record.at("output").get<std::string>();
            pair.origin = pair_origin_from(record.at("origin").get<std::string>());
            pair.snippet_id = record.at("snippet_id").get<std::string>();
            pairs.push_back(std::move(pair));
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorCode::parse,
                 path + " line " + std::to_string(line_no) + ": " + e.what());
        } catch (const Error &e) {
            fail(ErrorCode::parse, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return pairs;
}

PipelineResult run_pipeline(const PipelineConfig &config, GenClient &client) {
    std::vector<CodeSnippet> snippets = ingest_corpus(config.corpus_root, config.extension);
    PipelineResult result;
    result.snippets_ingested = snippets.size();

    if (config.sample_n > 0) {
        snippets = sample_snippets(snippets, config.sample_n, config.seed);
    }
    result.snippets_sampled = snippets.size();

    // Each slot is filled by exactly one worker; the collected order matches
    // the sampled order, so thread scheduling never changes the output.
    struct Slot {
        std::vector<InstructionPair> pairs;
        std::string error;
    };
    std::vector<Slot> slots(snippets.size());
    std::atomic<size_t> cursor{0};
    int width = std::max(1, std::min<int>(config.workers, static_cast<int>(snippets.size())));
    auto worker = [&] {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= snippets.size()) return;
            try {
                slots[i].pairs = generate_pairs(snippets[i], client);
            } catch (const std::exception &e) {
                slots[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < width; w++) threads.emplace_back(worker);
    for (auto &t : threads) t.join();

    std::vector<InstructionPair> raw;
    for (size_t i = 0; i < snippets.size(); i++) {
        if (!slots[i].error.empty()) {
            result.skipped.push_back({snippets[i].id, snippets[i].source_path, slots[i].error});
            continue;
        }
        for (InstructionPair &pair : slots[i].pairs) raw.push_back(std::move(pair));
    }

    FilterResult filtered = filter_and_truncate(raw);
    result.pairs = std::move(filtered.pairs);
    result.dropped = std::move(filtered.dropped);
    return result;
}

} // namespace lsi
