#include <doctest.h>

#include <cmath>

#include "checkpoint.hpp"
#include "tokenizer.hpp"
#include "trainer.hpp"

using namespace lsi;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.vocab_size = tok::VOCAB_SIZE;
    c.d_model = 32;
    c.n_heads = 2;
    c.n_layers = 2;
    c.d_ff = 48;
    c.max_seq_len = 192;
    c.seed = 5;
    return c;
}

std::vector<InstructionPair> tiny_dataset(int n) {
    std::vector<InstructionPair> out;
    for (int i = 0; i < n; i++) {
        InstructionPair p;
        p.instruction = "task " + std::to_string(i);
        p.output = "const v" + std::to_string(i) + " = " + std::to_string(i * i) + ";";
        p.origin = PairOrigin::manual;
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

TEST_CASE("prompt rendering substitutes the placeholder verbatim") {
    std::string rendered = render_prompt(kDefaultPromptTemplate, "X");
    CHECK(rendered.find("Using the instruction context below") != std::string::npos);
    CHECK(rendered.find(": X") != std::string::npos);
    CHECK(rendered.find("{instruction}") == std::string::npos);
    CHECK_THROWS_AS(render_prompt("no placeholder here", "X"), Error);
}

TEST_CASE("warmup schedule matches the closed form") {
    CHECK(warmup_lr(0.0002, 50, 25) == doctest::Approx(0.0001).epsilon(1e-15));
    CHECK(warmup_lr(0.0002, 50, 50) == doctest::Approx(0.0002).epsilon(1e-15));
    CHECK(warmup_lr(0.0002, 50, 500) == doctest::Approx(0.0002).epsilon(1e-15));
    CHECK(warmup_lr(0.0002, 50, 1) == doctest::Approx(0.0002 / 50).epsilon(1e-15));
    for (int t = 1; t < 200; t++) {
        double expected = 0.0002 * std::min(1.0, t / 50.0);
        CHECK(warmup_lr(0.0002, 50, t) == expected);
    }
}

TEST_CASE("build_example lays out tokens, targets and mask") {
    InstructionPair pair;
    pair.instruction = "ab";
    pair.output = "cde";
    std::string tmpl = ">{instruction}<";
    auto ex = build_example(pair, tmpl, 64);
    REQUIRE(ex.has_value());
    // sequence: BOS > a b < SEP c d e EOS -> 10 tokens, inputs/targets are 9
    REQUIRE(ex->inputs.size() == 9);
    CHECK(ex->inputs[0] == tok::BOS);
    CHECK(ex->inputs[1] == '>');
    CHECK(ex->inputs[4] == '<');
    CHECK(ex->inputs[5] == tok::SEP);
    CHECK(ex->targets[8] == tok::EOS);
    for (size_t i = 0; i + 1 < 9; i++) CHECK(ex->targets[i] == ex->inputs[i + 1]);

    // prompt span = BOS + 4 prompt bytes + SEP = 6; masked targets = c, d, e, EOS
    int mask_sum = 0;
    for (uint8_t m : ex->mask) mask_sum += m;
    CHECK(mask_sum == 4); // q + 1 with q = 3
    CHECK(ex->mask[4] == 0); // SEP target, prompt side
    CHECK(ex->mask[5] == 1); // first output byte
}

TEST_CASE("build_example with empty output masks only EOS") {
    InstructionPair pair;
    pair.instruction = "xy";
    pair.output = "";
    auto ex = build_example(pair, "{instruction}", 64);
    REQUIRE(ex.has_value());
    int mask_sum = 0;
    for (uint8_t m : ex->mask) mask_sum += m;
    CHECK(mask_sum == 1);
    CHECK(ex->mask.back() == 1);
    CHECK(ex->targets.back() == tok::EOS);
}

TEST_CASE("build_example skips when the prompt exhausts the budget") {
    InstructionPair pair;
    pair.instruction = std::string(100, 'a');
    pair.output = "const x = 1;";
    std::string reason;
    auto ex = build_example(pair, "{instruction}", 32, &reason);
    CHECK(!ex.has_value());
    CHECK(reason.find("budget") != std::string::npos);
}

TEST_CASE("build_example truncates long outputs at seq_len") {
    InstructionPair pair;
    pair.instruction = "i";
    pair.output = std::string(500, 'z');
    auto ex = build_example(pair, "{instruction}", 40);
    REQUIRE(ex.has_value());
    CHECK(ex->inputs.size() == 39); // seq_len tokens -> 39 input/target pairs
}

TEST_CASE("loss ignores masked-out target perturbations") {
    Model m = Model::init(tiny_config());
    InstructionPair pair = tiny_dataset(1)[0];
    auto ex = build_example(pair, kDefaultPromptTemplate, 192);
    REQUIRE(ex.has_value());

    auto loss_with_targets = [&](const std::vector<int> &targets) {
        Tape tape;
        BoundModel bound(tape, m, ForwardOptions{});
        return tape.scalar_value(
            tape.cross_entropy(bound.forward(ex->inputs), targets, ex->mask));
    };
    double base = loss_with_targets(ex->targets);
    std::vector<int> perturbed = ex->targets;
    for (size_t i = 0; i < perturbed.size(); i++) {
        if (!ex->mask[i]) perturbed[i] = (perturbed[i] + 13) % tok::VOCAB_SIZE;
    }
    CHECK(loss_with_targets(perturbed) == base);
}

TEST_CASE("train requires adapters and a non-empty dataset") {
    Model m = Model::init(tiny_config());
    TrainConfig cfg;
    CHECK_THROWS_AS(train(m, {}, cfg), Error);
    CHECK_THROWS_AS(train(m, tiny_dataset(2), cfg), Error); // no adapters attached
}

TEST_CASE("training is deterministic and freezes the base") {
    TrainConfig cfg;
    cfg.seq_len = 192;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.learning_rate = 0.001;
    cfg.warmup_steps = 5;
    cfg.seed = 21;
    auto dataset = tiny_dataset(8);

    auto run = [&] {
        Model m = Model::init(tiny_config());
        lora_attach(m, LoraConfig{}, cfg.seed);
        TrainResult r = train(m, dataset, cfg);
        return std::pair{m, r};
    };
    auto [m1, r1] = run();
    auto [m2, r2] = run();
    CHECK(r1.step_losses == r2.step_losses);
    REQUIRE(m1.lora.has_value());
    for (size_t i = 0; i < m1.lora->adapters.size(); i++) {
        CHECK(m1.lora->adapters[i].a == m2.lora->adapters[i].a);
        CHECK(m1.lora->adapters[i].b == m2.lora->adapters[i].b);
    }

    // frozen bases match a freshly initialized model bit for bit
    Model fresh = Model::init(tiny_config());
    for (size_t li = 0; li < m1.layers.size(); li++) {
        CHECK(m1.layers[li].wq == fresh.layers[li].wq);
        CHECK(m1.layers[li].wk == fresh.layers[li].wk);
        CHECK(m1.layers[li].wv == fresh.layers[li].wv);
        CHECK(m1.layers[li].wo == fresh.layers[li].wo);
    }
    CHECK(m1.tok_embed == fresh.tok_embed);
    CHECK(m1.head == fresh.head);

    CHECK(r1.steps == static_cast<int>(r1.step_losses.size()));
    CHECK(r1.epoch_mean_losses.size() == 2);
}

TEST_CASE("single-pair overfit memorizes and regenerates the output") {
    ModelConfig mc = tiny_config();
    mc.seed = 99;
    Model m = Model::init(mc);

    InstructionPair pair;
    pair.instruction = "emit answer";
    pair.output = "const answer = 42;";

    LoraConfig lora;
    lora.rank = 16;
    lora.alpha = 32.0;
    lora.dropout = 0.0;
    lora.targets = parse_lora_targets("qkvo");
    lora_attach(m, lora, 7);

    TrainConfig cfg;
    cfg.seq_len = 192;
    cfg.batch_size = 1;
    cfg.epochs = 200;
    cfg.max_steps = 200;
    cfg.learning_rate = 0.01;
    cfg.warmup_steps = 10;
    cfg.beta1 = 0.85;
    cfg.beta2 = 0.99;
    cfg.weight_decay = 0.0;
    cfg.seed = 3;
    TrainResult result = train(m, {pair}, cfg);
    REQUIRE(!result.step_losses.empty());
    CHECK(result.step_losses.back() < 0.05);

    // greedy generation from the training prompt reproduces the output
    std::string prompt = render_prompt(cfg.prompt_template, pair.instruction);
    std::vector<int> prompt_ids;
    prompt_ids.push_back(tok::BOS);
    for (int id : tok::encode(prompt)) prompt_ids.push_back(id);
    prompt_ids.push_back(tok::SEP);

    GenerateParams gen;
    gen.max_new = 64;
    gen.temperature = 0.0;
    std::vector<int> completion = generate(m, prompt_ids, gen);
    CHECK(tok::decode(completion, /*strict=*/false) == pair.output);
}

TEST_CASE("training aborts with the step number on a non-finite loss") {
    Model m = Model::init(tiny_config());
    lora_attach(m, LoraConfig{});
    // poison one adapter factor so the first forward produces NaN logits
    m.lora->adapters[0].a.data[0] = std::nan("");
    m.lora->adapters[0].b.data[0] = 1.0;
    TrainConfig cfg;
    cfg.seq_len = 192;
    CHECK_THROWS_WITH_AS(train(m, tiny_dataset(2), cfg), doctest::Contains("step 1"), Error);
}

TEST_CASE("checkpoints reload with identical adapters and fraction") {
    Model m = Model::init(tiny_config());
    lora_attach(m, LoraConfig{});
    TrainConfig cfg;
    cfg.seq_len = 192;
    cfg.batch_size = 2;
    cfg.epochs = 1;
    train(m, tiny_dataset(4), cfg);

    std::string path = "/tmp/lsi_test_trainer_ckpt.bin";
    save_model(m, path);
    Model loaded = load_model(path);
    CHECK(lora_trainable_fraction(loaded) == lora_trainable_fraction(m));
    std::vector<int> probe = {tok::BOS, 'h', 'i'};
    CHECK(model_forward(loaded, probe) == model_forward(m, probe));
}
