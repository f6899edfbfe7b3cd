#include <doctest.h>

#include "lutnn/engine_log.hpp"
#include "lutnn/metrics.hpp"

using namespace lutnn;

TEST_CASE("model-free accounting") {
    CHECK(nuc_modelfree(512, 32) == 16384);
    CHECK(nwnc_modelfree(std::vector<int64_t>(8, 512), 32) == 131072);
    CHECK(nuc_modelfree(256, 32) == 8192);
    CHECK(nwnc_modelfree(std::vector<int64_t>(8, 256), 32) == 65536);
    CHECK(nuc_modelfree(100, 1) == 100);
}

TEST_CASE("octave/linear accounting") {
    OctaveLinearCounts r3 = nuc_octave_linear(16, 15, 64);
    CHECK(r3.nuc == 1038);
    CHECK(r3.lut_entries == 1024);

    CHECK(nuc_octave_linear(8, 15, 32).nuc == 270);
    CHECK(nuc_octave_linear(8, 15, 32, true).lut_entries == 288); // zero-weight column included
    CHECK(nuc_octave_linear(7, 1, 5).nuc == 35);

    CHECK(nuc_octave_linear(16, 15, 128).nuc == 2062); // 2048 + 14
    CHECK(nuc_octave_linear(8, 15, 64).nuc == 526);    // 512 + 14
}

TEST_CASE("octave/octave accounting") {
    OctaveOctaveCounts worked = nuc_octave_octave(8, 15, 32, 3);
    CHECK(worked.nuc == 176); // max(32,8) + 4*32 + 15 + 3 - 2

    OctaveOctaveCounts row4 = nuc_octave_octave(8, 24, 64, 5);
    CHECK(row4.nuc == 347);
    CHECK(row4.table_entries == 320);

    CHECK(nuc_octave_octave(4, 1, 4, 1).nuc == nuc_octave_octave(4, 1, 4, 1).table_entries);
}

TEST_CASE("accounting functions are monotone in every parameter") {
    for (int64_t d = 1; d <= 4; ++d) {
        CHECK(nuc_modelfree(512 + d, 32) >= nuc_modelfree(512, 32));
        CHECK(nuc_modelfree(512, 32 + d) >= nuc_modelfree(512, 32));
        CHECK(nuc_octave_linear(16 + d, 15, 64).nuc >= nuc_octave_linear(16, 15, 64).nuc);
        CHECK(nuc_octave_linear(16, 15 + d, 64).nuc >= nuc_octave_linear(16, 15, 64).nuc);
        CHECK(nuc_octave_linear(16, 15, 64 + d).nuc >= nuc_octave_linear(16, 15, 64).nuc);
        CHECK(nuc_octave_octave(8 + d, 24, 64, 5).nuc >= nuc_octave_octave(8, 24, 64, 5).nuc);
        CHECK(nuc_octave_octave(8, 24 + d, 64, 5).nuc >= nuc_octave_octave(8, 24, 64, 5).nuc);
        CHECK(nuc_octave_octave(8, 24, 64 + d, 5).nuc >= nuc_octave_octave(8, 24, 64, 5).nuc);
        CHECK(nuc_octave_octave(8, 24, 64, 5 + d).nuc >= nuc_octave_octave(8, 24, 64, 5).nuc);
    }
}

TEST_CASE("network size bits formula") {
    NetworkSizeBits r = network_size_bits(100, 16, 8, 20, 8);
    CHECK(r.weight_table_bits == 400);
    CHECK(r.lut_bits == 13 * 8 * 16);
    CHECK(r.act_table_bits == 60);
    CHECK(r.total_bits == 2124);
    CHECK(r.download_ratio == doctest::Approx(8.0));

    // the weight table dominates at realistic N_net
    NetworkSizeBits big = network_size_bits(10000000, 481, 64, 207, 16);
    CHECK(static_cast<double>(big.weight_table_bits) >
          0.99 * static_cast<double>(big.total_bits));
}

TEST_CASE("complexity report counts shared tables once") {
    // homogeneous relu6 net: one LUT serves both layers including the final
    FloatModel m;
    m.input_shape = {4};
    std::vector<float> w1(16, 0.25f), w2(8, 0.25f);
    m.layers.push_back(LayerSpec::dense(Tensor({4, 4}, w1), Tensor({4}, {0, 0, 0, 0}),
                                        Activation::relu6));
    m.layers.push_back(LayerSpec::dense(Tensor({2, 4}, w2), Tensor({2}, {0, 0}),
                                        Activation::none));
    Codebook wcb = octave_codebook(4, 3, 1.0);
    QuantizeOptions opt;
    opt.n_a = 8;
    QuantizedModel qm = build_quantized_model(m, wcb, opt);
    ComplexityReport rep = complexity_report(qm);

    CHECK(rep.n_net == 30);
    // octave codebook lacks 1.0 at K_max = 1 -> one extra readout row
    int64_t rows = 2 * 4 * 3 + 1 + 1;
    CHECK(rep.layers[0].lut_entries == rows * 8);
    CHECK(rep.network_lut_entries == rows * 8); // both layers share one stored table
    // shared codebook: NWNC = NUC = N_q*N_a + N_o - 1
    CHECK(rep.nwnc == rep.layers[0].nuc);
    CHECK(rep.nwnc == nuc_octave_linear(4, 3, 8).nuc);

    // serialized byte accounting
    uint64_t lut_bytes = 0;
    for (const auto& s : rep.serialized_sections)
        if (s.name.find("lut") != std::string::npos) lut_bytes += s.bytes;
    CHECK(lut_bytes == static_cast<uint64_t>(2 * rows * 8 * 4));
}
