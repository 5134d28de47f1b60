#include <doctest.h>

#include "pulsealign/encoder.hpp"

using namespace pulsealign;

namespace {

Tensor<float> random_batch(std::int64_t n, std::int64_t len, Rng& rng) {
    Tensor<float> x({n, len});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    return x;
}

} // namespace

TEST_CASE("reference encoder reproduces the published shape chain") {
    EncoderConfig cfg = EncoderConfig::reference();
    cfg.dropout_p = 0.0;
    Rng init(1);
    Net1dEncoder<float> enc(cfg, init);

    Tensor<float> x({2, 1, 1250});
    Rng data(2);
    for (auto& v : x.data) v = static_cast<float>(data.normal());

    Tape<float> tape;
    tape.recording = false;
    Rng unused(0);
    std::vector<std::array<std::int64_t, 2>> shapes;
    auto out = enc.forward(tape, make_var(std::move(x)), Mode::kEval, unused, &shapes);

    const std::vector<std::array<std::int64_t, 2>> expected = {
        {64, 1250}, {64, 625}, {160, 313}, {160, 157}, {400, 79}, {400, 40}, {1024, 20}};
    REQUIRE(shapes.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(shapes[i][0] == expected[i][0]);
        CHECK(shapes[i][1] == expected[i][1]);
    }
    CHECK(out->value.shape == std::vector<std::int64_t>{2, 1024});
}

TEST_CASE("parameter counts: stem block and literal totals") {
    Rng init(1);
    Net1dEncoder<float> enc(EncoderConfig::reference(), init);
    const std::vector<std::int64_t> counts = enc.stage_param_counts();
    REQUIRE(counts.size() == 7);

    // Stem: conv(1->64, k=3) 192+64 plus batch-norm 2*64.
    CHECK(counts[0] == 384);

    // Literal block arithmetic for the second row: two units of
    // (BN 128 + conv1 4160) + (BN 128 + conv3 12352) + (BN 128 + conv1 4160)
    // + SE 4192 = 25248 each.
    CHECK(counts[1] == 50496);

    // The literal total intentionally differs from the published summary;
    // both are reported side by side rather than silently reconciled.
    std::int64_t total = 0;
    for (auto c : counts) total += c;
    CHECK(total == enc.param_count());
    CHECK(total != kPublishedReferenceTotal);
    CHECK(kPublishedReferenceTotal == 5850864);

    // A narrower internal width approaches the published budget.
    EncoderConfig narrow = EncoderConfig::reference();
    narrow.bottleneck_ratio = 0.5;
    Rng init2(1);
    Net1dEncoder<float> enc_narrow(narrow, init2);
    CHECK(enc_narrow.param_count() < total);
}

TEST_CASE("a lone dense map 1024->512 holds 524800 scalars") {
    Rng init(4);
    DenseLayer<float> layer(1024, 512, init);
    CHECK(layer.weight->value.size() + layer.bias->value.size() == 524800);
}

TEST_CASE("builds are reproducible from the seed") {
    const EncoderConfig cfg = EncoderConfig::compact();
    Rng a(7), b(7), c(8);
    Net1dEncoder<float> enc_a(cfg, a), enc_b(cfg, b), enc_c(cfg, c);

    std::vector<NamedParam<float>> pa, pb, pc;
    std::vector<NamedBuffer<float>> ba, bb, bc;
    enc_a.collect("e", pa, ba);
    enc_b.collect("e", pb, bb);
    enc_c.collect("e", pc, bc);
    REQUIRE(pa.size() == pb.size());

    bool all_equal_ab = true, any_diff_ac = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i].var->value.data != pb[i].var->value.data) all_equal_ab = false;
        if (pa[i].var->value.data != pc[i].var->value.data) any_diff_ac = true;
    }
    CHECK(all_equal_ab);
    CHECK(any_diff_ac);
}

TEST_CASE("eval forward is deterministic and row-wise") {
    EncoderConfig cfg = EncoderConfig::compact();
    Rng init(5);
    Net1dEncoder<float> enc(cfg, init);
    Rng data(6);
    Tensor<float> rows = random_batch(3, cfg.input_length, data);

    // duplicate row 0 as row 2
    std::copy_n(rows.ptr(), cfg.input_length, rows.ptr() + 2 * cfg.input_length);

    const EmbeddingBatch<float> e1 = encoder_forward(enc, rows, Mode::kEval, init);
    const EmbeddingBatch<float> e2 = encoder_forward(enc, rows, Mode::kEval, init);
    CHECK(e1.values.data == e2.values.data);
    CHECK(e1.space == EmbeddingSpace::kEncoder);

    const std::int64_t d = e1.values.dim(1);
    for (std::int64_t j = 0; j < d; ++j) {
        CHECK(e1.values.at(0 * d + j) == e1.values.at(2 * d + j));
    }
}

TEST_CASE("train-mode dropout changes activations, eval mode does not") {
    EncoderConfig cfg = EncoderConfig::compact();
    cfg.dropout_p = 0.5;
    Rng init(5);
    Net1dEncoder<float> enc(cfg, init);
    Rng data(6);
    const Tensor<float> rows = random_batch(2, cfg.input_length, data);

    Rng d1(100), d2(200);
    Tape<float> t1, t2;
    t1.recording = false;
    t2.recording = false;
    Tensor<float> x3 = rows;
    x3.shape = {2, 1, cfg.input_length};
    auto y1 = enc.forward(t1, make_var(Tensor<float>(x3)), Mode::kTrain, d1);
    auto y2 = enc.forward(t2, make_var(Tensor<float>(x3)), Mode::kTrain, d2);
    CHECK(y1->value.data != y2->value.data);
}

TEST_CASE("projector contracts") {
    Rng init(9);
    Projector<float> proj(ProjectorConfig{8, 6, 4}, init);

    SUBCASE("zero input with zero biases gives zero output") {
        proj.narrow.bias->value.fill(0.0f);
        proj.squeeze.bias->value.fill(0.0f);
        Tape<float> tape;
        tape.recording = false;
        auto out = proj.forward(tape, make_var(Tensor<float>({3, 8})));
        for (float v : out->value.data) CHECK(v == 0.0f);
    }
    SUBCASE("row-wise: a row embeds the same alone or inside a batch") {
        Rng data(3);
        Tensor<float> big({8, 8});
        for (auto& v : big.data) v = static_cast<float>(data.normal());
        Tensor<float> one({1, 8});
        std::copy_n(big.ptr() + 5 * 8, 8, one.ptr());

        EmbeddingBatch<float> zb{big, EmbeddingSpace::kEncoder};
        EmbeddingBatch<float> zo{one, EmbeddingSpace::kEncoder};
        const EmbeddingBatch<float> hb = projector_forward(proj, zb);
        const EmbeddingBatch<float> ho = projector_forward(proj, zo);
        CHECK(hb.space == EmbeddingSpace::kShared);
        for (std::int64_t j = 0; j < 4; ++j) CHECK(hb.values.at(5 * 4 + j) == ho.values.at(j));
    }
    SUBCASE("wrong space tag is rejected") {
        EmbeddingBatch<float> shared{Tensor<float>({2, 8}), EmbeddingSpace::kShared};
        CHECK_THROWS_AS(projector_forward(proj, shared), Error);
    }
}

TEST_CASE("SE gate values stay inside (0, 1)") {
    Rng init(10);
    SqueezeExciteLayer<float> se(4, 2, init);
    Rng data(11);
    Tensor<float> x({2, 4, 6});
    for (auto& v : x.data) v = static_cast<float>(data.normal());
    auto xv = make_var(x);

    Tape<float> tape;
    tape.recording = false;
    auto pooled = mean_over_time(tape, xv);
    auto gate = sigmoid(tape, se.expand.forward(tape, swish(tape, se.reduce.forward(tape, pooled))));
    auto y = se.forward(tape, xv);

    for (float g : gate->value.data) {
        CHECK(g > 0.0f);
        CHECK(g < 1.0f);
    }
    // output equals input scaled channel-wise by the gate
    for (std::int64_t b = 0; b < 2; ++b) {
        for (std::int64_t c = 0; c < 4; ++c) {
            for (std::int64_t l = 0; l < 6; ++l) {
                const float expected = x.at((b * 4 + c) * 6 + l) * gate->value.at(b * 4 + c);
                CHECK(y->value.at((b * 4 + c) * 6 + l) == doctest::Approx(expected));
            }
        }
    }
}

TEST_CASE("encoder rejects malformed inputs and configs") {
    EncoderConfig cfg = EncoderConfig::compact();
    Rng init(1);
    Net1dEncoder<float> enc(cfg, init);
    Rng unused(0);
    Tape<float> tape;
    tape.recording = false;

    SUBCASE("wrong length") {
        CHECK_THROWS_AS(enc.forward(tape, make_var(Tensor<float>({1, 1, 999})), Mode::kEval, unused), Error);
    }
    SUBCASE("non-finite input") {
        Tensor<float> x({1, 1, cfg.input_length});
        x.at(5) = std::numeric_limits<float>::quiet_NaN();
        CHECK_THROWS_AS(enc.forward(tape, make_var(std::move(x)), Mode::kEval, unused), Error);
    }
    SUBCASE("channel mismatch between stages") {
        EncoderConfig bad = cfg;
        bad.stage_specs[2].c_in += 1;
        CHECK_THROWS_AS(bad.validate(), Error);
    }
}
