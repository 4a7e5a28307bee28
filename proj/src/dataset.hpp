#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gen_client.hpp"

namespace lsi {

struct CodeSnippet {
    std::string id; // stable content hash
    std::string source_path;
    std::string content;
};

std::string snippet_content_id(const std::string &content);

// Walks root recursively, keeping regular files whose name ends with
// extension. Snippets come back in lexicographic path order, deduplicated by
// content hash. An empty match set is an error.
std::vector<CodeSnippet> ingest_corpus(const std::string &root, const std::string &extension);

// Uniform sample of n snippets without replacement (Fisher-Yates, own rng,
// so the result is identical across platforms for a fixed seed).
std::vector<CodeSnippet> sample_snippets(const std::vector<CodeSnippet> &snippets, size_t n,
                                         uint64_t seed);

enum class PairOrigin { generated, evolved, manual };
const char *pair_origin_name(PairOrigin origin);
PairOrigin pair_origin_from(const std::string &name);

struct InstructionPair {
    std::string instruction;
    std::string output;
    PairOrigin origin = PairOrigin::manual;
    std::string snippet_id; // empty for manual pairs

    bool operator==(const InstructionPair &) const = default;
};

// The two fixed prompt templates used against the generation client: one
// asks for an instruction matching a code snippet, the other rewrites an
// instruction into a harder variant.
std::string self_instruct_prompt(const std::string &code);
std::string evolve_prompt(const std::string &instruction);

// Produces exactly two pairs per snippet (direct + evolved); output text is
// the snippet body for both. Client failures propagate as Error.
std::vector<InstructionPair> generate_pairs(const CodeSnippet &snippet, GenClient &client);

struct DropRecord {
    std::string reason; // empty-instruction | empty-output | no-code-content | duplicate
    std::string instruction;
};

struct FilterResult {
    std::vector<InstructionPair> pairs;
    std::vector<DropRecord> dropped;
};

constexpr size_t kMaxOutputTokens = 4096;

// Drops ill-formed pairs (empty fields, outputs with no code-shaped line,
// duplicate instruction/output combinations) and truncates surviving
// outputs to kMaxOutputTokens tokens.
FilterResult filter_and_truncate(const std::vector<InstructionPair> &pairs);

bool looks_like_code(const std::string &text);

void write_jsonl(const std::vector<InstructionPair> &pairs, const std::string &path);
std::vector<InstructionPair> read_jsonl(const std::string &path);

struct PipelineConfig {
    std::string corpus_root;
    std::string extension = ".ts";
    size_t sample_n = 0; // 0 = use every snippet
    uint64_t seed = 0;
    int workers = 4;
};

struct SkipRecord {
    std::string snippet_id;
    std::string source_path;
    std::string error;
};

struct PipelineResult {
    std::vector<InstructionPair> pairs;
    std::vector<SkipRecord> skipped; // snippets whose client calls failed
    std::vector<DropRecord> dropped;
    size_t snippets_ingested = 0;
    size_t snippets_sampled = 0;
};

// ingest -> sample -> generate (bounded worker pool, input order preserved)
// -> filter -> truncate. Client failures skip the snippet and continue.
PipelineResult run_pipeline(const PipelineConfig &config, GenClient &client);

} // namespace lsi
