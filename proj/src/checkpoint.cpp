#include "checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sha256.hpp"

namespace lsi {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'I', 'F'};

void put_u32(std::string &out, uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string &out, const std::string &s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.append(s);
}

void put_tensor(std::string &out, const std::string &name, const Matrix &m) {
    put_string(out, name);
    put_u32(out, static_cast<uint32_t>(m.rows));
    put_u32(out, static_cast<uint32_t>(m.cols));
    size_t bytes = m.data.size() * sizeof(double);
    size_t offset = out.size();
    out.resize(offset + bytes);
    std::memcpy(out.data() + offset, m.data.data(), bytes);
}

struct Reader {
    const std::string &buf;
    size_t pos = 0;
    const std::string &path;

    void need(size_t n, const char *what) {
        if (pos + n > buf.size()) {
            fail(ErrorCode::parse, path + ": truncated checkpoint while reading " + what);
        }
    }
    uint32_t u32(const char *what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; i++) v |= static_cast<uint32_t>(uint8_t(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string str(const char *what) {
        uint32_t n = u32(what);
        need(n, what);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    Matrix tensor(std::string *name) {
        *name = str("tensor name");
        uint32_t rows = u32("tensor rows");
        uint32_t cols = u32("tensor cols");
        size_t bytes = static_cast<size_t>(rows) * cols * sizeof(double);
        need(bytes, "tensor data");
        Matrix m(static_cast<int>(rows), static_cast<int>(cols));
        std::memcpy(m.data.data(), buf.data() + pos, bytes);
        pos += bytes;
        return m;
    }
};

nlohmann::json config_to_json(const ModelConfig &c) {
    return {
        {"vocab_size", c.vocab_size}, {"d_model", c.d_model},
        {"n_heads", c.n_heads},       {"n_layers", c.n_layers},
        {"d_ff", c.d_ff},             {"max_seq_len", c.max_seq_len},
        {"seed", c.seed},
    };
}

ModelConfig config_from_json(const nlohmann::json &j) {
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.validate();
    return c;
}

nlohmann::json lora_to_json(const LoraConfig &cfg) {
    return {
        {"rank", cfg.rank},
        {"alpha", cfg.alpha},
        {"dropout", cfg.dropout},
        {"targets", cfg.targets_str()},
    };
}

LoraConfig lora_from_json(const nlohmann::json &j) {
    LoraConfig cfg;
    cfg.rank = j.at("rank").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.targets = parse_lora_targets(j.at("targets").get<std::string>());
    return cfg;
}

void write_file(const std::string &path, std::string body) {
    auto digest = Sha256::hash(body.data(), body.size());
    body.append(reinterpret_cast<const char *>(digest.data()), digest.size());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write checkpoint: " + path);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) fail(ErrorCode::io, "write failed for checkpoint: " + path);
}

// Verifies magic, version and trailer checksum; returns the body with the
// reader positioned after the header JSON.
std::string read_file(const std::string &path, nlohmann::json *config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 4 + 4 + 32) {
        fail(ErrorCode::parse, path + ": file too small to be a checkpoint");
    }

    std::string body = buf.substr(0, buf.size() - 32);
    auto expect = Sha256::hash(body.data(), body.size());
    std::array<uint8_t, 32> found;
    std::memcpy(found.data(), buf.data() + buf.size() - 32, 32);
    if (found != expect) {
        fail(ErrorCode::checksum, path + ": checksum mismatch (expected " + to_hex(expect) +
                                      ", found " + to_hex(found) + ")");
    }

    if (std::memcmp(body.data(), kMagic, 4) != 0) {
        fail(ErrorCode::parse, path + ": bad magic, not a checkpoint file");
    }
    Reader r{body, 4, path};
    uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        fail(ErrorCode::parse, path + ": unsupported version " + std::to_string(version) +
                                   " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    *config = nlohmann::json::parse(r.str("config"));
    return body.substr(r.pos);
}

} // namespace

void save_model(const Model &model, const std::string &path) {
    std::string body(kMagic, 4);
    put_u32(body, kCheckpointVersion);

    nlohmann::json config = {
        {"kind", "model"},
        {"model", config_to_json(model.config)},
        {"lora", model.lora ? lora_to_json(model.lora->config) : nlohmann::json(nullptr)},
    };
    put_string(body, config.dump());

    // named_params walks a non-const model; serialization never mutates
    Model &mutable_model = const_cast<Model &>(model);
    for (const NamedParam &p : named_params(mutable_model)) {
        put_tensor(body, p.name, *p.matrix);
    }
    write_file(path, std::move(body));
}

Model load_model(const std::string &path) {
    nlohmann::json config;
    std::string tensors = read_file(path, &config);
    if (config.at("kind").get<std::string>() != "model") {
        fail(ErrorCode::parse, path + ": checkpoint holds " +
                                   config.at("kind").get<std::string>() + ", expected a model");
    }

    Model model;
    model.config = config_from_json(config.at("model"));
    const ModelConfig &c = model.config;
    model.tok_embed = Matrix(c.vocab_size, c.d_model);
    model.pos_embed = Matrix(c.max_seq_len, c.d_model);
    model.layers.resize(c.n_layers);
    for (LayerWeights &l : model.layers) {
        l.norm1_gain = Matrix(1, c.d_model);
        l.norm1_bias = Matrix(1, c.d_model);
        l.wq = Matrix(c.d_model, c.d_model);
        l.wk = Matrix(c.d_model, c.d_model);
        l.wv = Matrix(c.d_model, c.d_model);
        l.wo = Matrix(c.d_model, c.d_model);
        l.norm2_gain = Matrix(1, c.d_model);
        l.norm2_bias = Matrix(1, c.d_model);
        l.ff1_w = Matrix(c.d_model, c.d_ff);
        l.ff1_b = Matrix(1, c.d_ff);
        l.ff2_w = Matrix(c.d_ff, c.d_model);
        l.ff2_b = Matrix(1, c.d_model);
    }
    model.head = Matrix(c.d_model, c.vocab_size);
    if (!config.at("lora").is_null()) {
        AdapterBundle bundle;
        bundle.config = lora_from_json(config.at("lora"));
        for (int layer = 0; layer < c.n_layers; layer++) {
            for (LoraTarget t : bundle.config.targets) {
                LoraAdapter ad;
                ad.layer = layer;
                ad.target = t;
                ad.a = Matrix(c.d_model, bundle.config.rank);
                ad.b = Matrix(bundle.config.rank, c.d_model);
                bundle.adapters.push_back(std::move(ad));
            }
        }
        model.lora = std::move(bundle);
    }

    Reader r{tensors, 0, path};
    std::vector<NamedParam> params = named_params(model);
    size_t filled = 0;
    while (r.pos < tensors.size()) {
        std::string name;
        Matrix m = r.tensor(&name);
        bool matched = false;
        for (NamedParam &p : params) {
            if (p.name == name) {
                if (p.matrix->rows != m.rows || p.matrix->cols != m.cols) {
                    fail(ErrorCode::parse, path + ": tensor " + name + " has shape " +
                                               m.shape_str() + ", expected " +
                                               p.matrix->shape_str());
                }
                *p.matrix = std::move(m);
                matched = true;
                filled++;
                break;
            }
        }
        if (!matched) fail(ErrorCode::parse, path + ": unexpected tensor " + name);
    }
    if (filled != params.size()) {
        fail(ErrorCode::parse, path + ": checkpoint holds " + std::to_string(filled) +
                                   " tensors, model needs " + std::to_string(params.size()));
    }
    return model;
}

void save_adapter_bundle(const AdapterBundle &bundle, const ModelConfig &owner,
                         const std::string &path) {
    std::string body(kMagic, 4);
    put_u32(body, kCheckpointVersion);
    nlohmann::json config = {
        {"kind", "adapters"},
        {"model", config_to_json(owner)},
        {"lora", lora_to_json(bundle.config)},
    };
    put_string(body, config.dump());
    for (const LoraAdapter &ad : bundle.adapters) {
        std::string prefix = "layers." + std::to_string(ad.layer) + ".lora." +
                             lora_target_name(ad.target) + ".";
        put_tensor(body, prefix + "a", ad.a);
        put_tensor(body, prefix + "b", ad.b);
    }
    write_file(path, std::move(body));
}

AdapterBundle load_adapter_bundle(const std::string &path, ModelConfig *owner) {
    nlohmann::json config;
    std::string tensors = read_file(path, &config);
    if (config.at("kind").get<std::string>() != "adapters") {
        fail(ErrorCode::parse, path + ": checkpoint holds " +
                                   config.at("kind").get<std::string>() +
                                   ", expected an adapter bundle");
    }
    ModelConfig c = config_from_json(config.at("model"));
    if (owner != nullptr) *owner = c;

    AdapterBundle bundle;
    bundle.config = lora_from_json(config.at("lora"));
    for (int layer = 0; layer < c.n_layers; layer++) {
        for (LoraTarget t : bundle.config.targets) {
            LoraAdapter ad;
            ad.layer = layer;
            ad.target = t;
            bundle.adapters.push_back(std::move(ad));
        }
    }

    Reader r{tensors, 0, path};
    size_t filled = 0;
    while (r.pos < tensors.size()) {
        std::string name;
        Matrix m = r.tensor(&name);
        bool matched = false;
        for (LoraAdapter &ad : bundle.adapters) {
            std::string prefix =
                "layers." + std::to_string(ad.layer) + ".lora." + lora_target_name(ad.target) + ".";
            if (name == prefix + "a") {
                ad.a = std::move(m);
                matched = true;
                filled++;
            } else if (name == prefix + "b") {
                ad.b = std::move(m);
                matched = true;
                filled++;
            }
            if (matched) break;
        }
        if (!matched) fail(ErrorCode::parse, path + ": unexpected tensor " + name);
    }
    if (filled != bundle.adapters.size() * 2) {
        fail(ErrorCode::parse, path + ": adapter bundle is missing tensors");
    }
    return bundle;
}

} // namespace lsi
