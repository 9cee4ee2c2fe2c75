#include "drqr/seq2seq.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "drqr/common.hpp"

using namespace drqr;

namespace {

std::vector<QueryPair> toy_pairs() {
    return {
        {"q1", "q2", "what is rsa", "rsa definition key"},
        {"q3", "q4", "dog food best", "best food for dog"},
        {"q5", "q6", "tall tree", "tall tree species"},
    };
}

ModelConfig tiny_config(Eigen::Index dim = 8) {
    ModelConfig config;
    config.emb_dim = dim;
    config.hidden_dim = dim;
    config.max_len = 8;
    config.dropout = 0.0;
    return config;
}

std::vector<int> to_ids(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
    std::vector<int> ids;
    for (const auto& t : tokens) ids.push_back(vocab.id(t));
    return ids;
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

// hand-rolled GRU recurrence, written from the update equations directly
Eigen::VectorXd oracle_gru_step(const GruParams& g, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& h) {
    Eigen::VectorXd z = sigmoid_vec(g.w_z.value * x + g.u_z.value * h + g.b_z.value.col(0));
    Eigen::VectorXd r = sigmoid_vec(g.w_r.value * x + g.u_r.value * h + g.b_r.value.col(0));
    Eigen::VectorXd cand =
        (g.w_h.value * x + g.u_h.value * r.cwiseProduct(h) + g.b_h.value.col(0)).array().tanh();
    return z.cwiseProduct(h) + (Eigen::VectorXd::Ones(h.size()) - z).cwiseProduct(cand);
}

Eigen::MatrixXd oracle_bigru(ModelParameters& p, const std::vector<int>& ids) {
    const Eigen::Index h = p.config.hidden_dim;
    const std::size_t n = ids.size();
    std::vector<Eigen::VectorXd> xs;
    for (int id : ids) xs.push_back(p.embedding.value.row(id).transpose());
    Eigen::MatrixXd states(static_cast<Eigen::Index>(n), 2 * h);
    Eigen::VectorXd state = Eigen::VectorXd::Zero(h);
    for (std::size_t i = 0; i < n; ++i) {
        state = oracle_gru_step(p.enc_fwd, xs[i], state);
        states.row(static_cast<Eigen::Index>(i)).head(h) = state.transpose();
    }
    state = Eigen::VectorXd::Zero(h);
    for (std::size_t i = n; i-- > 0;) {
        state = oracle_gru_step(p.enc_bwd, xs[i], state);
        states.row(static_cast<Eigen::Index>(i)).tail(h) = state.transpose();
    }
    return states;
}

}  // namespace

TEST_CASE("vocabulary build: reserved ids, threshold, determinism") {
    std::vector<QueryPair> pairs = {{"a", "b", "cat cat dog", "dog bird"}};
    auto vocab = Vocabulary::build(pairs, 1);
    CHECK(vocab.token(Vocabulary::kPad) == "<pad>");
    CHECK(vocab.token(Vocabulary::kUnk) == "<unk>");
    CHECK(vocab.token(Vocabulary::kBos) == "<bos>");
    CHECK(vocab.token(Vocabulary::kEos) == "<eos>");
    // frequency then lexicographic: cat(2), dog(2) tie -> cat first; bird(1)
    CHECK(vocab.id("cat") == 4);
    CHECK(vocab.id("dog") == 5);
    CHECK(vocab.id("bird") == 6);
    CHECK(vocab.size() == 7);
    CHECK(vocab.id("unknown-token") == Vocabulary::kUnk);

    auto thresholded = Vocabulary::build(pairs, 2);
    CHECK(thresholded.lookup("bird") == std::nullopt);
    CHECK(thresholded.id("bird") == Vocabulary::kUnk);

    auto again = Vocabulary::build(pairs, 1);
    CHECK(again.tokens() == vocab.tokens());

    CHECK_THROWS_AS(Vocabulary::build({}, 1), std::invalid_argument);
}

TEST_CASE("parameter initialization is uniform in [-0.1, 0.1]") {
    auto params = ModelParameters::init(tiny_config(12), 30, 99);
    double lo = 0.0, hi = 0.0;
    for (ad::Tensor* t : params.tensors()) {
        lo = std::min(lo, t->value.minCoeff());
        hi = std::max(hi, t->value.maxCoeff());
    }
    CHECK(lo >= -0.1);
    CHECK(hi <= 0.1);
    CHECK(lo < -0.05);  // actually spread out
    CHECK(hi > 0.05);
}

TEST_CASE("encode matches the hand-rolled recurrence oracle") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);

    SUBCASE("zero parameters: states follow the zero-weight algebra") {
        auto params = ModelParameters::init(tiny_config(), vocab.size(), 1);
        for (ad::Tensor* t : params.tensors()) t->value.setZero();
        std::vector<int> ids = to_ids(vocab, {"what", "is", "rsa"});
        auto states = encode(params, ids);
        CHECK(states.rows() == 3);
        CHECK(states.cwiseAbs().maxCoeff() == 0.0);  // zero weights keep h at zero
        CHECK(states.isApprox(oracle_bigru(params, ids), 1e-12));
    }
    SUBCASE("random parameters: exact recurrence agreement") {
        auto params = ModelParameters::init(tiny_config(), vocab.size(), 7);
        std::vector<int> ids = to_ids(vocab, {"dog", "food", "best", "tree"});
        auto states = encode(params, ids);
        CHECK(states.isApprox(oracle_bigru(params, ids), 1e-12));
    }
}

TEST_CASE("encode shape and edge cases") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 3);
    std::vector<int> one = to_ids(vocab, {"dog"});
    CHECK(encode(params, one).rows() == 1);
    CHECK_THROWS_AS(encode(params, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("bidirectionality: reversing a non-palindromic source changes the states") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    std::mt19937_64 seed_rng(11);
    for (int round = 0; round < 5; ++round) {
        auto params = ModelParameters::init(tiny_config(), vocab.size(), seed_rng());
        std::vector<int> ids = to_ids(vocab, {"dog", "food", "tree"});
        std::vector<int> reversed(ids.rbegin(), ids.rend());
        auto fwd = encode(params, ids);
        auto rev = encode(params, reversed);
        CHECK(!fwd.isApprox(rev, 1e-9));
    }
}

TEST_CASE("attention over identical states is uniform; N=1 is degenerate") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 5);
    const Eigen::Index h = params.config.hidden_dim;

    Eigen::MatrixXd same(3, 2 * h);
    Eigen::VectorXd row = Eigen::VectorXd::Random(2 * h);
    for (int i = 0; i < 3; ++i) same.row(i) = row.transpose();
    Eigen::VectorXd state = Eigen::VectorXd::Random(h);
    auto attn = attention_context(params, state, same);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(attn.alpha(i) == doctest::Approx(1.0 / 3.0));

    Eigen::MatrixXd single = same.topRows(1);
    auto one = attention_context(params, state, single);
    CHECK(one.alpha.size() == 1);
    CHECK(one.alpha(0) == doctest::Approx(1.0));
    CHECK(one.context.isApprox(single.row(0).transpose(), 1e-12));
}

TEST_CASE("attention weights normalize on random inputs") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 17);
    const Eigen::Index h = params.config.hidden_dim;
    std::mt19937_64 rng(23);
    for (int round = 0; round < 200; ++round) {
        Eigen::Index n = 1 + static_cast<Eigen::Index>(uniform_below(rng, 7));
        Eigen::MatrixXd states = Eigen::MatrixXd::Random(n, 2 * h) * 3.0;
        Eigen::VectorXd state = Eigen::VectorXd::Random(h) * 3.0;
        auto attn = attention_context(params, state, states);
        CHECK(attn.alpha.minCoeff() >= 0.0);
        CHECK(attn.alpha.sum() == doctest::Approx(1.0).epsilon(1e-6));
        // c_t = sum alpha_i h_i
        Eigen::VectorXd expect = states.transpose() * attn.alpha;
        CHECK(attn.context.isApprox(expect, 1e-9));
    }
}

TEST_CASE("copy mixture boundaries: forced gate") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 29);
    std::vector<std::string> tokens = {"dog", "zzz-oov", "tree"};
    auto source = ExtendedSource::make(vocab, tokens);
    auto enc_states = encode(params, source.input_ids);
    Eigen::VectorXd state = Eigen::VectorXd::Random(params.config.hidden_dim);

    SUBCASE("gate forced to 0 gives the generation distribution exactly") {
        params.copy_bias.value(0, 0) = -1e9;
        auto mix = decode_step(params, Vocabulary::kBos, state, enc_states, source);
        CHECK(mix.gate == 0.0);
        for (Eigen::Index i = 0; i < vocab.size(); ++i) CHECK(mix.combined(i) == mix.gen(i));
        for (Eigen::Index i = vocab.size(); i < source.ext_size; ++i) CHECK(mix.combined(i) == 0.0);
    }
    SUBCASE("gate forced to 1 scatters attention onto the extended vocabulary") {
        params.copy_bias.value(0, 0) = 1e9;
        auto mix = decode_step(params, Vocabulary::kBos, state, enc_states, source);
        CHECK(mix.gate == 1.0);
        // scatter-sum oracle over source positions
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(source.ext_size);
        for (std::size_t i = 0; i < tokens.size(); ++i)
            expected(source.ext_ids[i]) += mix.alpha(static_cast<Eigen::Index>(i));
        CHECK(mix.combined.isApprox(expected, 1e-12));
        CHECK(mix.combined == mix.copy);
    }
}

TEST_CASE("source OOV tokens get probability iff the gate and attention allow") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 31);
    std::vector<std::string> tokens = {"dog", "zzz-oov"};
    auto source = ExtendedSource::make(vocab, tokens);
    REQUIRE(source.ext_size == vocab.size() + 1);
    CHECK(source.input_ids[1] == Vocabulary::kUnk);
    auto enc_states = encode(params, source.input_ids);
    Eigen::VectorXd state = Eigen::VectorXd::Random(params.config.hidden_dim);

    auto mix = decode_step(params, Vocabulary::kBos, state, enc_states, source);
    Eigen::Index oov_id = vocab.size();
    // random init: gate in (0,1), attention strictly positive
    CHECK(mix.gate > 0.0);
    CHECK(mix.alpha(1) > 0.0);
    CHECK(mix.combined(oov_id) == doctest::Approx(mix.gate * mix.alpha(1)).epsilon(1e-12));

    params.copy_bias.value(0, 0) = -1e9;  // q = 0 kills the copy path
    auto no_copy = decode_step(params, Vocabulary::kBos, state, enc_states, source);
    CHECK(no_copy.combined(oov_id) == 0.0);
}

TEST_CASE("copy mixture distributions normalize across random forward passes") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    std::mt19937_64 rng(37);
    for (int round = 0; round < 50; ++round) {
        auto params = ModelParameters::init(tiny_config(), vocab.size(), rng());
        std::vector<std::string> tokens = {"dog", "oov-" + std::to_string(round), "tree"};
        auto source = ExtendedSource::make(vocab, tokens);
        auto enc_states = encode(params, source.input_ids);
        Eigen::VectorXd state = Eigen::VectorXd::Random(params.config.hidden_dim);
        auto mix = decode_step(params, Vocabulary::kBos, state, enc_states, source);
        CHECK(mix.gen.minCoeff() >= 0.0);
        CHECK(mix.gen.sum() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(mix.copy.minCoeff() >= 0.0);
        CHECK(mix.copy.sum() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(mix.combined.minCoeff() >= 0.0);
        CHECK(mix.combined.sum() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("sequence_nll analytic cases") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 41);
    auto source = ExtendedSource::make(vocab, std::vector<std::string>{"dog", "food"});

    SUBCASE("probability forced to 1 on the target gives loss 0") {
        params.copy_bias.value(0, 0) = -1e9;
        params.out_b.value(Vocabulary::kEos, 0) = 60.0;
        std::vector<Eigen::Index> target = {Vocabulary::kEos};
        CHECK(sequence_nll(params, source, target, false) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("uniform output distribution gives per-token loss ln V") {
        for (ad::Tensor* t : params.tensors()) t->value.setZero();
        params.copy_bias.value(0, 0) = -1e9;
        std::vector<Eigen::Index> target = {vocab.id("dog"), vocab.id("tree"), Vocabulary::kEos};
        double loss = sequence_nll(params, source, target, false);
        CHECK(loss == doctest::Approx(std::log(double(vocab.size()))).epsilon(1e-9));
    }
    SUBCASE("target validation") {
        std::vector<Eigen::Index> empty;
        CHECK_THROWS_AS(sequence_nll(params, source, empty, false), std::invalid_argument);
        std::vector<Eigen::Index> no_eos = {vocab.id("dog")};
        CHECK_THROWS_AS(sequence_nll(params, source, no_eos, false), std::invalid_argument);
    }
}

TEST_CASE("sequence_nll teacher-forces the ground truth and masks PAD") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 43);
    std::vector<std::string> src_tokens = {"what", "is", "rsa"};
    auto source = ExtendedSource::make(vocab, src_tokens);
    std::vector<Eigen::Index> target = {static_cast<Eigen::Index>(vocab.id("rsa")),
                                        static_cast<Eigen::Index>(Vocabulary::kPad),
                                        static_cast<Eigen::Index>(vocab.id("key")),
                                        static_cast<Eigen::Index>(Vocabulary::kEos)};

    // oracle: replay the decoder feeding the ground-truth token at every step,
    // regardless of what the model would itself predict
    auto enc_states = encode(params, source.input_ids);
    Eigen::VectorXd state;
    {
        ad::Tape tape;
        auto enc = encode_on_tape(tape, params, source.input_ids);
        state = tape.value(enc.initial_decoder_state);
    }
    double total = 0.0;
    std::size_t counted = 0;
    int prev = Vocabulary::kBos;
    for (Eigen::Index y : target) {
        auto mix = decode_step(params, prev, state, enc_states, source);
        state = mix.new_state;
        if (y != Vocabulary::kPad) {
            total += -std::log(mix.combined(y));
            ++counted;
        }
        prev = y < vocab.size() ? static_cast<int>(y) : Vocabulary::kUnk;
    }
    double expected = total / double(counted);
    CHECK(sequence_nll(params, source, target, false) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sequence_nll gradients match central finite differences (tiny model)") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    REQUIRE(vocab.size() <= 20);
    auto params = ModelParameters::init(tiny_config(6), vocab.size(), 47);
    auto source = ExtendedSource::make(vocab, std::vector<std::string>{"dog", "oov-x", "tree"});
    std::vector<Eigen::Index> target = {static_cast<Eigen::Index>(vocab.id("tree")),
                                        vocab.size(),  // the copyable OOV token
                                        static_cast<Eigen::Index>(vocab.id("dog")),
                                        static_cast<Eigen::Index>(Vocabulary::kEos)};

    params.zero_grads();
    sequence_nll(params, source, target, true);

    const double eps = 1e-4;
    double worst = 0.0;
    for (ad::Tensor* t : params.tensors()) {
        for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
            for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
                double saved = t->value(r, c);
                t->value(r, c) = saved + eps;
                double up = sequence_nll(params, source, target, false);
                t->value(r, c) = saved - eps;
                double down = sequence_nll(params, source, target, false);
                t->value(r, c) = saved;
                double fd = (up - down) / (2.0 * eps);
                double analytic = t->grad(r, c);
                double rel = std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)});
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("greedy decode: truncation, determinism, forced argmax") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 53);
    std::vector<std::string> source = {"dog", "food"};

    auto once = greedy_decode(params, vocab, source, 6);
    auto twice = greedy_decode(params, vocab, source, 6);
    CHECK(once == twice);
    CHECK(greedy_decode(params, vocab, source, 1).size() <= 1);

    // forcing one output token makes greedy emit it up to max_len
    params.copy_bias.value(0, 0) = -1e9;
    params.out_b.value.setZero();
    params.out_b.value(vocab.id("tree"), 0) = 60.0;
    auto forced = greedy_decode(params, vocab, source, 4);
    CHECK(forced == std::vector<std::string>(4, "tree"));

    // forcing EOS stops immediately
    params.out_b.value.setZero();
    params.out_b.value(Vocabulary::kEos, 0) = 60.0;
    CHECK(greedy_decode(params, vocab, source, 4).empty());
}

TEST_CASE("sampling: degenerate distribution equals greedy; seeds reproduce") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(), vocab.size(), 59);
    params.copy_bias.value(0, 0) = -1e9;
    params.out_b.value(vocab.id("food"), 0) = 60.0;
    std::vector<std::string> source = {"dog"};

    std::mt19937_64 rng(5);
    auto sampled = sample_decode(params, vocab, source, 3, rng);
    CHECK(sampled.tokens == greedy_decode(params, vocab, source, 3));
    CHECK(sampled.log_probs.size() == sampled.ext_ids.size());
    for (double lp : sampled.log_probs) CHECK(lp == doctest::Approx(0.0).epsilon(1e-9));

    std::mt19937_64 rng_a(9), rng_b(9);
    auto params2 = ModelParameters::init(tiny_config(), vocab.size(), 61);
    auto a = sample_decode(params2, vocab, source, 5, rng_a);
    auto b = sample_decode(params2, vocab, source, 5, rng_b);
    CHECK(a.tokens == b.tokens);
    CHECK(a.log_probs == b.log_probs);
}

TEST_CASE("multinomial draw frequencies match the distribution") {
    Eigen::VectorXd p(3);
    p << 0.5, 0.3, 0.2;
    std::mt19937_64 rng(71);
    std::array<int, 3> counts = {0, 0, 0};
    const int n = 10000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(multinomial_draw(p, rng))] += 1;
    for (int k = 0; k < 3; ++k)
        CHECK(std::abs(double(counts[static_cast<std::size_t>(k)]) / n - p(k)) <= 0.02);
}

TEST_CASE("train_ml: loss decreases, histories reproduce, patience stops") {
    std::vector<QueryPair> pairs;
    const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon",
                           "zeta",  "eta",  "theta", "iota",  "kappa"};
    for (int i = 0; i < 10; ++i) {
        std::string text = std::string(words[i]) + " " + words[(i + 1) % 10];
        pairs.push_back({"s" + std::to_string(i), "t" + std::to_string(i), text, text});
    }
    auto vocab = Vocabulary::build(pairs, 1);

    TrainConfig config;
    config.learning_rate = 5e-3;
    config.batch_size = 5;
    config.max_epochs = 8;
    config.patience = 8;
    config.dropout = 0.1;
    config.seed = 3;

    SUBCASE("training loss is non-increasing over the first epochs") {
        auto params = ModelParameters::init(tiny_config(16), vocab.size(), 3);
        auto result = train_ml(params, vocab, pairs, pairs, config);
        REQUIRE(result.history.size() >= 4);
        for (std::size_t e = 1; e < 4; ++e)
            CHECK(result.history[e].train <= result.history[e - 1].train + 1e-3);
    }
    SUBCASE("seeded reruns give identical histories") {
        auto params_a = ModelParameters::init(tiny_config(16), vocab.size(), 3);
        auto params_b = ModelParameters::init(tiny_config(16), vocab.size(), 3);
        auto res_a = train_ml(params_a, vocab, pairs, pairs, config);
        auto res_b = train_ml(params_b, vocab, pairs, pairs, config);
        REQUIRE(res_a.history.size() == res_b.history.size());
        for (std::size_t e = 0; e < res_a.history.size(); ++e) {
            CHECK(res_a.history[e].train == res_b.history[e].train);
            CHECK(res_a.history[e].valid == res_b.history[e].valid);
        }
    }
    SUBCASE("stagnant validation exhausts patience before max epochs") {
        // conflicting validation target: as training overfits, valid loss rises
        std::vector<QueryPair> conflicting = {{"s0", "tX", "alpha beta", "kappa iota"}};
        auto params = ModelParameters::init(tiny_config(16), vocab.size(), 5);
        TrainConfig stopper = config;
        stopper.max_epochs = 300;
        stopper.patience = 3;
        auto result = train_ml(params, vocab, pairs, conflicting, stopper);
        CHECK(result.history.size() < 300);
    }
    SUBCASE("empty splits are rejected") {
        auto params = ModelParameters::init(tiny_config(16), vocab.size(), 5);
        CHECK_THROWS_AS(train_ml(params, vocab, {}, pairs, config), std::invalid_argument);
    }
}

TEST_CASE("checkpoint round trip preserves behaviour; corrupt files error") {
    auto vocab = Vocabulary::build(toy_pairs(), 1);
    auto params = ModelParameters::init(tiny_config(10), vocab.size(), 67);
    auto path = std::filesystem::temp_directory_path() / "drqr_test_ckpt.bin";
    save_checkpoint(path, params, vocab);

    auto [loaded, loaded_vocab] = load_checkpoint(path);
    CHECK(loaded_vocab.tokens() == vocab.tokens());
    CHECK(loaded.config.hidden_dim == params.config.hidden_dim);
    std::vector<std::string> source = {"dog", "mystery-token"};
    CHECK(greedy_decode(loaded, loaded_vocab, source, 5) ==
          greedy_decode(params, vocab, source, 5));

    SUBCASE("corrupt magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('Z');
        f.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"),
                             std::runtime_error);
    }
    SUBCASE("truncation") {
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 64);
        CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    }
    std::filesystem::remove(path);
}
