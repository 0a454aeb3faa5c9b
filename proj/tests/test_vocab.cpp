#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "dk2/codec.hpp"
#include "dk2/dk2tree.hpp"
#include "dk2/vocab.hpp"
#include "oracle.hpp"

using namespace dk2;
using testutil::MatrixOracle;

namespace {

void require_ok(const AuditReport& rep) {
    if (!rep.ok) FAIL(rep.issues);
}

std::string bits_string(const BitVec& v) {
    std::string s;
    for (uint64_t i = 0; i < v.size(); ++i) s += v.get(i) ? '1' : '0';
    return s;
}

// byte cost of a frequency multiset under the best possible code assignment
uint64_t ideal_bytes(std::vector<uint64_t> freqs) {
    std::sort(freqs.begin(), freqs.end(), std::greater<>());
    uint64_t total = 0;
    for (size_t i = 0; i < freqs.size(); ++i) total += freqs[i] * etdc::length(i);
    return total;
}

DK2Config vocab_cfg(VocabMode mode) {
    DK2Config cfg;
    cfg.block_bytes = 64;
    cfg.sample_l = 8;
    cfg.vocab = mode;
    return cfg;
}

}  // namespace

TEST_CASE("vocabulary assigns codes in first-seen order and counts occurrences") {
    MatrixVocabulary v;
    CHECK(v.acquire(0b1010) == 0);
    CHECK(v.acquire(0b0001) == 1);
    CHECK(v.acquire(0b1010) == 0);
    CHECK(v.acquire(0b1111) == 2);
    CHECK(v.live_entries() == 3);
    CHECK(v.total_occurrences() == 4);
    CHECK(v.freq_of_code(0) == 2);
    CHECK(v.freq_of_code(1) == 1);
    CHECK(v.code_of(0b1010) == 0);
    CHECK(v.code_of(0b0110) == MatrixVocabulary::kDeadCode);
    CHECK(v.matrix_of(2) == 0b1111);
    require_ok(v.audit());
}

TEST_CASE("a released entry dies and its code is reused newest first") {
    MatrixVocabulary v;
    v.acquire(10);
    v.acquire(20);
    v.acquire(30);
    v.release(1);
    CHECK(v.code_of(20) == MatrixVocabulary::kDeadCode);
    CHECK(v.live_entries() == 2);
    v.release(2);
    CHECK(v.acquire(40) == 2);
    CHECK(v.acquire(50) == 1);
    CHECK(v.acquire(60) == 3);
    CHECK(v.live_entries() == 4);
    require_ok(v.audit());
}

TEST_CASE("byte counters stay exact through arbitrary count changes") {
    MatrixVocabulary v;
    std::mt19937_64 rng(9);
    std::vector<uint64_t> freq(300, 0);
    uint64_t current = 0;
    for (int step = 0; step < 20000; ++step) {
        uint64_t m = 1 + rng() % 300;
        uint32_t code = v.code_of(m);
        if (code != MatrixVocabulary::kDeadCode && freq[code] > 0 && rng() % 3 == 0) {
            v.release(code);
            current -= etdc::length(code);
            freq[code] -= 1;
        } else {
            code = v.acquire(m);
            current += etdc::length(code);
            freq[code] += 1;
        }
    }
    CHECK(v.current_bytes() == current);
    std::vector<uint64_t> live;
    for (uint64_t f : freq)
        if (f > 0) live.push_back(f);
    CHECK(v.optimal_bytes() == ideal_bytes(live));
    require_ok(v.audit());
}

TEST_CASE("rebuild reassigns codes by descending frequency") {
    MatrixVocabulary v;
    // matrix 10*i acquired i times, so matrix 50 is the most frequent
    for (int i = 1; i <= 5; ++i)
        for (int n = 0; n < i; ++n) v.acquire(uint64_t(10 * i));
    std::vector<uint32_t> remap = v.rebuild();
    CHECK(remap.size() == 5);
    for (int i = 1; i <= 5; ++i) CHECK(v.code_of(uint64_t(10 * i)) == uint32_t(5 - i));
    CHECK(v.size_ratio() == 1.0);
    CHECK(v.current_bytes() == v.optimal_bytes());
    require_ok(v.audit());

    // dead entries vanish from the remap
    v.release(v.code_of(10));
    auto remap2 = v.rebuild();
    CHECK(remap2[4] == MatrixVocabulary::kDeadCode);
    CHECK(v.live_entries() == 4);
}

TEST_CASE("vocabulary snapshots restore the exact state") {
    MatrixVocabulary v;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 500; ++i) v.acquire(1 + rng() % 150);
    v.release(v.code_of(3) != MatrixVocabulary::kDeadCode ? v.code_of(3) : 0);
    ByteWriter w;
    v.save(w);
    ByteReader r(w.buf);
    MatrixVocabulary back = MatrixVocabulary::load(r);
    CHECK(r.exhausted());
    CHECK(back == v);
    CHECK(back.current_bytes() == v.current_bytes());
    CHECK(back.optimal_bytes() == v.optimal_bytes());
    require_ok(back.audit());
    ByteWriter w2;
    back.save(w2);
    CHECK(w2.buf == w.buf);
}

TEST_CASE("coded leaf layer matches a plain bit reference through edits") {
    VocabLTree lt(16, vocab_cfg(VocabMode::on));
    std::vector<uint64_t> ref;
    std::mt19937_64 rng(31);
    for (int step = 0; step < 3000; ++step) {
        unsigned roll = rng() % 100;
        if (roll < 45 || ref.empty()) {
            uint64_t at = rng() % (ref.size() + 1);
            uint64_t m = 1 + rng() % 0xFFFF;
            lt.insert_group(at * 16, m);
            ref.insert(ref.begin() + at, m);
        } else if (roll < 70) {
            uint64_t at = rng() % ref.size();
            lt.remove_group(at * 16);
            ref.erase(ref.begin() + at);
        } else {
            uint64_t at = rng() % ref.size();
            unsigned bit = rng() % 16;
            uint64_t next = ref[at] ^ (uint64_t(1) << bit);
            if (next == 0) continue;
            lt.set_bit(at * 16 + bit, (next >> bit) & 1);
            ref[at] = next;
        }
        CHECK(lt.vocab().total_occurrences() == ref.size());
        if (step % 200 == 0) {
            require_ok(lt.audit());
            BitVec want;
            for (uint64_t m : ref) want.append_bits(m, 16);
            CHECK(bits_string(lt.to_bitvec()) == bits_string(want));
        }
    }
    require_ok(lt.audit());
    for (uint64_t i = 0; i < ref.size(); ++i) CHECK(lt.read_group(i * 16) == ref[i]);
}

TEST_CASE("a forced rebuild brings the coded size to the ideal exactly") {
    VocabLTree lt(16, vocab_cfg(VocabMode::on));
    // 200 distinct singleton groups, then delete the first 150: the survivors
    // keep large codes while their ideal codes are small
    for (uint64_t i = 0; i < 200; ++i) lt.insert_group(i * 16, i + 1);
    for (int i = 0; i < 150; ++i) lt.remove_group(0);
    CHECK(lt.vocab().size_ratio() > 1.0);
    BitVec before = lt.to_bitvec();

    uint64_t n = lt.rebuild_count();
    lt.force_rebuild();
    CHECK(lt.rebuild_count() == n + 1);
    CHECK(lt.vocab().size_ratio() == 1.0);
    CHECK(lt.vocab().current_bytes() == lt.vocab().optimal_bytes());
    CHECK(bits_string(lt.to_bitvec()) == bits_string(before));
    require_ok(lt.audit());
}

TEST_CASE("tracked mode rebuilds when the waste ratio crosses the bound") {
    DK2Config cfg = vocab_cfg(VocabMode::tracked);
    cfg.rebuild_ratio = 1.2;
    cfg.rebuild_floor_bytes = 64;
    VocabLTree lt(16, cfg);
    for (uint64_t i = 0; i < 400; ++i) lt.insert_group(i * 16, i + 1);
    CHECK(lt.rebuild_count() == 0);
    // dropping the 300 oldest leaves only two-byte codes behind; the ideal
    // assignment for 100 singletons is one byte each, ratio 2.0
    for (int i = 0; i < 300; ++i) lt.remove_group(0);
    CHECK(lt.rebuild_count() >= 1);
    CHECK(lt.vocab().size_ratio() <= 1.2);
    require_ok(lt.audit());
}

TEST_CASE("untracked mode rebuilds on a fixed update period") {
    DK2Config cfg = vocab_cfg(VocabMode::on);
    cfg.rebuild_period = 50;
    VocabLTree lt(16, cfg);
    for (uint64_t i = 0; i < 50; ++i) lt.insert_group(i * 16, 1 + (i % 7));
    CHECK(lt.rebuild_count() == 1);
    for (uint64_t i = 0; i < 50; ++i) lt.set_bit(i % 50 * 16 + 10, ((1 + i % 7) >> 10 & 1) == 0);
    CHECK(lt.rebuild_count() == 2);
}

TEST_CASE("bulk loading assigns rank-order codes from the start") {
    std::vector<uint64_t> groups;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1000; ++i) groups.push_back(1 + rng() % 40);
    VocabLTree lt(16, vocab_cfg(VocabMode::on));
    lt.bulk_load(groups);
    CHECK(lt.vocab().size_ratio() == 1.0);
    CHECK(lt.total_bits() == 16000);
    for (uint64_t i = 0; i < groups.size(); ++i) CHECK(lt.read_group(i * 16) == groups[i]);
    require_ok(lt.audit());
}

TEST_CASE("coded layer snapshots restore byte for byte") {
    VocabLTree lt(16, vocab_cfg(VocabMode::tracked));
    std::mt19937_64 rng(15);
    for (uint64_t i = 0; i < 300; ++i) lt.insert_group(i * 16, 1 + rng() % 99);
    for (int i = 0; i < 50; ++i) lt.remove_group(16 * (rng() % 200));
    ByteWriter w;
    lt.save(w);
    ByteReader r(w.buf);
    VocabLTree back = VocabLTree::load(r, vocab_cfg(VocabMode::tracked));
    CHECK(r.exhausted());
    CHECK(bits_string(back.to_bitvec()) == bits_string(lt.to_bitvec()));
    require_ok(back.audit());
    ByteWriter w2;
    back.save(w2);
    CHECK(w2.buf == w.buf);
}

TEST_CASE("plain and coded leaf storage hold identical bitmaps under one workload") {
    for (VocabMode mode : {VocabMode::on, VocabMode::tracked}) {
        DK2Config plain_cfg;
        DK2Config coded_cfg = vocab_cfg(mode);
        coded_cfg.rebuild_period = 300;
        coded_cfg.rebuild_floor_bytes = 128;
        KSchedule sched = KSchedule::uniform(2, 256, 4);
        DK2Tree plain(sched, plain_cfg);
        DK2Tree coded(sched, coded_cfg);
        CHECK(coded.l_layer().vocab_backed());
        CHECK_FALSE(plain.l_layer().vocab_backed());

        MatrixOracle oracle;
        std::mt19937_64 rng(mode == VocabMode::on ? 51 : 52);
        for (int step = 0; step < 3000; ++step) {
            uint64_t r = rng() % 256, c = rng() % 256;
            if (rng() % 3) {
                CHECK(plain.set_cell(r, c) == coded.set_cell(r, c));
                oracle.set(r, c);
            } else {
                CHECK(plain.clear_cell(r, c) == coded.clear_cell(r, c));
                oracle.clear(r, c);
            }
            if (step % 250 == 0) {
                CHECK(bits_string(plain.l_layer().to_bitvec()) ==
                      bits_string(coded.l_layer().to_bitvec()));
                require_ok(coded.audit());
            }
        }
        CHECK(bits_string(plain.t_tree().to_bitvec()) ==
              bits_string(coded.t_tree().to_bitvec()));
        CHECK(bits_string(plain.l_layer().to_bitvec()) ==
              bits_string(coded.l_layer().to_bitvec()));
        CHECK(coded.all_cells() == oracle.all());
        require_ok(coded.audit());
    }
}
