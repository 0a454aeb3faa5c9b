// Command-line front end: build, query, update, convert, and benchmark
// relation snapshots, and drive the RDF triple store. Exit codes: 0 success,
// 1 usage error, 2 data error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "dk2/dk2tree.hpp"
#include "dk2/gen.hpp"
#include "dk2/io.hpp"
#include "dk2/rdf.hpp"
#include "dk2/static_k2.hpp"
#include "dk2/textio.hpp"

namespace {

// Bad flag combinations and malformed command lines; everything thrown after
// flag validation is a data error instead.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string schedule = "2";
    uint32_t kprime = 0;
    uint32_t classes = 4;
    std::string vocab = "off";
    dk2::DK2Config cfg;
};

void add_config_flags(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--k-schedule", o.schedule,
                    "per-level arity: \"hybrid\", a single k, or a list like 4,4,2,2");
    sub->add_option("--kprime", o.kprime, "last-level submatrix side k'");
    sub->add_option("--block-size", o.cfg.block_bytes, "leaf block size in bytes");
    sub->add_option("--classes", o.classes, "number of leaf capacity classes");
    sub->add_option("--sample-t", o.cfg.sample_t, "bits per rank sample in T leaves");
    sub->add_option("--sample-l", o.cfg.sample_l, "codewords per offset sample in coded leaves");
    sub->add_option("--vocab", o.vocab, "last-level storage: off, on, or tracked")
        ->check(CLI::IsMember({"off", "on", "tracked"}));
    sub->add_option("--rebuild-ratio", o.cfg.rebuild_ratio,
                    "rebuild the vocabulary when current/optimal bytes exceed this");
    sub->add_option("--rebuild-floor-bytes", o.cfg.rebuild_floor_bytes,
                    "skip ratio-driven rebuilds below this coded size");
}

// Turns the raw flag values into a validated config; throws UsageError so
// that flag problems are reported before any file is opened.
dk2::DK2Config finalize(CommonOpts& o) {
    try {
        if (o.classes == 0 || o.classes > 256)
            throw std::invalid_argument("config: classes must be in 1..256");
        o.cfg.expansions = uint8_t(o.classes - 1);
        if (o.vocab == "off") o.cfg.vocab = dk2::VocabMode::off;
        else if (o.vocab == "on") o.cfg.vocab = dk2::VocabMode::on;
        else o.cfg.vocab = dk2::VocabMode::tracked;
        o.cfg.validate();
        dk2::KSchedule::parse(o.schedule, 2, uint8_t(o.kprime));  // probe
        return o.cfg;
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

dk2::KSchedule schedule_for(const CommonOpts& o, uint64_t min_side) {
    return dk2::KSchedule::parse(o.schedule, std::max<uint64_t>(2, min_side),
                                 uint8_t(o.kprime));
}

using Snapshot = std::variant<dk2::DK2Tree, dk2::StaticK2Tree, dk2::TripleStore>;

constexpr uint32_t kDynMagic = 0x44324B44;
constexpr uint32_t kStaticMagic = 0x53324B44;
constexpr uint32_t kRdfMagic = 0x52324B44;

Snapshot load_any(const std::string& path) {
    std::vector<uint8_t> bytes = dk2::read_file(path);
    dk2::ByteReader r({bytes.data(), bytes.size()});
    if (bytes.size() < 4) throw std::runtime_error(path + ": not a snapshot");
    uint32_t magic = dk2::ByteReader(r).u32();
    switch (magic) {
        case kDynMagic: return dk2::DK2Tree::load(r);
        case kStaticMagic: return dk2::StaticK2Tree::load(r);
        case kRdfMagic: return dk2::TripleStore::load(r);
        default: throw std::runtime_error(path + ": not a recognized snapshot");
    }
}

template <class T>
void save_snapshot(const T& value, const std::string& path) {
    dk2::ByteWriter w;
    value.save(w);
    dk2::write_file(path, w.buf);
}

std::string read_text(const std::string& path) {
    std::vector<uint8_t> bytes = dk2::read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

std::string schedule_text(const dk2::KSchedule& sched) {
    std::string s;
    for (uint8_t k : sched.arity) {
        if (!s.empty()) s += ',';
        s += std::to_string(unsigned(k));
    }
    return s;
}

// --- build ------------------------------------------------------------------

struct BuildArgs {
    CommonOpts opts;
    std::string input, output;
    bool build_static = false;
};

int run_build(BuildArgs& a) {
    dk2::DK2Config cfg = finalize(a.opts);
    if (a.build_static && cfg.vocab != dk2::VocabMode::off)
        throw UsageError("--vocab applies only to dynamic snapshots");
    std::vector<dk2::Cell> edges = dk2::textio::parse_edges(read_text(a.input));
    uint64_t min_side = 2;
    for (const dk2::Cell& e : edges) min_side = std::max({min_side, e.row + 1, e.col + 1});
    dk2::KSchedule sched = schedule_for(a.opts, min_side);
    if (a.build_static) {
        save_snapshot(dk2::StaticK2Tree::build(sched, std::move(edges)), a.output);
    } else {
        dk2::DK2Tree tree(sched, cfg);
        for (const dk2::Cell& e : edges) tree.set_cell(e.row, e.col);
        save_snapshot(tree, a.output);
    }
    return 0;
}

// --- query ------------------------------------------------------------------

struct QueryArgs {
    std::string snapshot;
    std::vector<std::string> spec;
};

uint64_t parse_coord(const std::string& tok) {
    size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(tok, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tok.size()) throw UsageError("query: bad coordinate \"" + tok + "\"");
    return v;
}

template <class Tree>
int query_tree(const Tree& tree, const std::vector<std::string>& spec,
               const std::vector<uint64_t>& args) {
    uint64_t side = tree.side();
    for (uint64_t v : args)
        if (v >= side) throw std::runtime_error("query: coordinate out of range");
    const std::string& kind = spec[0];
    if (kind == "cell") {
        std::cout << (tree.contains(args[0], args[1]) ? "1" : "0") << "\n";
    } else if (kind == "row") {
        for (uint64_t c : tree.columns_in_row(args[0])) std::cout << c << "\n";
    } else if (kind == "col") {
        for (uint64_t r : tree.rows_in_column(args[0])) std::cout << r << "\n";
    } else {
        if (args[0] > args[1] || args[2] > args[3])
            throw std::runtime_error("query: empty range bounds");
        for (const dk2::Cell& cell : tree.cells_in_range(args[0], args[1], args[2], args[3]))
            std::cout << cell.row << " " << cell.col << "\n";
    }
    return 0;
}

int run_query(QueryArgs& a) {
    if (a.spec.empty()) throw UsageError("query: expected cell|row|col|range");
    const std::string& kind = a.spec[0];
    size_t want = kind == "cell" ? 3 : kind == "row" || kind == "col" ? 2
                : kind == "range" ? 5 : 0;
    if (want == 0) throw UsageError("query: unknown form \"" + kind + "\"");
    if (a.spec.size() != want) throw UsageError("query: wrong number of coordinates");
    std::vector<uint64_t> args;
    for (size_t i = 1; i < a.spec.size(); ++i) args.push_back(parse_coord(a.spec[i]));

    Snapshot snap = load_any(a.snapshot);
    if (auto* d = std::get_if<dk2::DK2Tree>(&snap)) return query_tree(*d, a.spec, args);
    if (auto* s = std::get_if<dk2::StaticK2Tree>(&snap)) return query_tree(*s, a.spec, args);
    throw std::runtime_error("query: expected a matrix snapshot, got a triple store");
}

// --- update -----------------------------------------------------------------

struct UpdateArgs {
    std::string snapshot, updates, output;
};

int run_update(UpdateArgs& a) {
    std::vector<dk2::textio::UpdateOp> ops = dk2::textio::parse_updates(read_text(a.updates));
    Snapshot snap = load_any(a.snapshot);
    auto* tree = std::get_if<dk2::DK2Tree>(&snap);
    if (!tree) throw std::runtime_error("update: only dynamic snapshots are mutable");
    for (const dk2::textio::UpdateOp& op : ops) {
        using Kind = dk2::textio::UpdateOp::Kind;
        switch (op.kind) {
            case Kind::set:
                tree->set_cell(op.row, op.col);
                break;
            case Kind::clear:
                if (!tree->clear_cell(op.row, op.col))
                    std::cerr << "warning: cell (" << op.row << ", " << op.col
                              << ") was already clear\n";
                break;
            case Kind::add_node:
                std::cout << "node=" << tree->add_node() << "\n";
                break;
            case Kind::remove_node: {
                const auto& free = tree->free_node_ids();
                if (op.row >= tree->nodes_allocated() ||
                    std::find(free.begin(), free.end(), op.row) != free.end())
                    throw std::runtime_error("update: node id not allocated");
                tree->remove_node(op.row);
                break;
            }
        }
    }
    save_snapshot(*tree, a.output);
    return 0;
}

// --- convert / stats --------------------------------------------------------

struct ConvertArgs {
    CommonOpts opts;
    std::string snapshot, output;
};

int run_convert(ConvertArgs& a) {
    dk2::DK2Config cfg = finalize(a.opts);
    Snapshot snap = load_any(a.snapshot);
    if (auto* d = std::get_if<dk2::DK2Tree>(&snap)) {
        save_snapshot(d->to_static(), a.output);
    } else if (auto* s = std::get_if<dk2::StaticK2Tree>(&snap)) {
        save_snapshot(dk2::DK2Tree::from_static(*s, cfg), a.output);
    } else {
        throw std::runtime_error("convert: triple stores cannot be converted");
    }
    return 0;
}

int run_stats(const std::string& path) {
    Snapshot snap = load_any(path);
    if (auto* d = std::get_if<dk2::DK2Tree>(&snap)) {
        std::cout << "kind=dynamic\n"
                  << "schedule=" << schedule_text(d->schedule()) << "\n"
                  << "side=" << d->side() << "\n"
                  << "levels=" << d->levels() << "\n"
                  << "cells=" << d->cell_count() << "\n"
                  << "t_bits=" << d->t_tree().total_bits() << "\n"
                  << "l_bits=" << d->l_layer().total_bits() << "\n"
                  << "nodes=" << d->nodes_in_use() << "\n"
                  << "bytes=" << d->measured_bytes() << "\n";
    } else if (auto* s = std::get_if<dk2::StaticK2Tree>(&snap)) {
        dk2::StaticK2Tree::Sizes sz = s->measure();
        std::cout << "kind=static\n"
                  << "schedule=" << schedule_text(s->schedule()) << "\n"
                  << "side=" << s->side() << "\n"
                  << "levels=" << s->schedule().levels() << "\n"
                  << "cells=" << s->cell_count() << "\n"
                  << "t_bits=" << sz.t_bits << "\n"
                  << "l_bits=" << sz.l_bits << "\n"
                  << "dir_bytes=" << sz.dir_bytes << "\n"
                  << "bytes=" << sz.total_bytes() << "\n";
    } else {
        auto* t = std::get_if<dk2::TripleStore>(&snap);
        std::cout << "kind=rdf\n"
                  << "triples=" << t->triple_count() << "\n"
                  << "predicates=" << t->predicate_count() << "\n"
                  << "terms=" << t->term_count() << "\n"
                  << "bytes=" << t->measured_bytes() << "\n";
    }
    return 0;
}

// --- rdf --------------------------------------------------------------------

struct RdfLoadArgs {
    CommonOpts opts;
    std::string input, output;
};

int run_rdf_load(RdfLoadArgs& a) {
    dk2::DK2Config cfg = finalize(a.opts);
    dk2::KSchedule proto = schedule_for(a.opts, 2);
    auto triples = dk2::textio::parse_triples(read_text(a.input));
    dk2::TripleStore store(cfg, proto);
    for (const auto& t : triples) store.add_triple(t[0], t[1], t[2]);
    save_snapshot(store, a.output);
    return 0;
}

bool is_var(const std::string& tok) { return !tok.empty() && tok.front() == '?'; }

dk2::TriplePattern pattern_of(const std::vector<std::string>& toks) {
    dk2::TriplePattern p;
    if (!is_var(toks[0])) p.s = toks[0];
    if (!is_var(toks[1])) p.p = toks[1];
    if (!is_var(toks[2])) p.o = toks[2];
    return p;
}

struct RdfPatternArgs {
    std::string snapshot;
    std::vector<std::string> terms;
};

int run_rdf_pattern(RdfPatternArgs& a) {
    dk2::TriplePattern pat = pattern_of(a.terms);
    Snapshot snap = load_any(a.snapshot);
    auto* store = std::get_if<dk2::TripleStore>(&snap);
    if (!store) throw std::runtime_error("rdf: expected a triple store snapshot");
    for (const dk2::Triple& t : store->match(pat)) {
        auto row = store->spell(t);
        std::cout << row[0] << "\t" << row[1] << "\t" << row[2] << "\n";
    }
    return 0;
}

struct RdfJoinArgs {
    std::string snapshot, strategy = "indep";
    std::vector<std::string> terms;  // left s p o, right s p o
};

// The join variable is the one variable name both patterns share; it fixes
// the subject/object role on each side.
std::pair<dk2::JoinSide, dk2::JoinSide> parse_join(const std::vector<std::string>& toks) {
    std::vector<std::string> lt(toks.begin(), toks.begin() + 3);
    std::vector<std::string> rt(toks.begin() + 3, toks.end());
    std::optional<dk2::Role> lrole, rrole;
    std::optional<std::string> shared;
    for (const std::string& name : {lt[0], lt[2]}) {
        if (!is_var(name) || name == "?") continue;
        if (shared && name == *shared) continue;
        if (name == rt[0] || name == rt[2]) {
            if (shared) throw UsageError("join: patterns share more than one variable");
            shared = name;
        }
    }
    if (!shared) throw UsageError("join: patterns must share one subject/object variable");
    if (*shared == lt[1] || *shared == rt[1])
        throw UsageError("join: the shared variable cannot be a predicate");
    if (is_var(lt[1]) && is_var(rt[1]))
        throw UsageError("join: only one side may leave the predicate variable");
    if (lt[0] == *shared && lt[2] == *shared)
        throw UsageError("join: the shared variable must appear once per side");
    if (rt[0] == *shared && rt[2] == *shared)
        throw UsageError("join: the shared variable must appear once per side");
    lrole = lt[0] == *shared ? dk2::Role::subject : dk2::Role::object;
    rrole = rt[0] == *shared ? dk2::Role::subject : dk2::Role::object;
    return {dk2::JoinSide{pattern_of(lt), *lrole}, dk2::JoinSide{pattern_of(rt), *rrole}};
}

int run_rdf_join(RdfJoinArgs& a) {
    auto [left, right] = parse_join(a.terms);
    Snapshot snap = load_any(a.snapshot);
    auto* store = std::get_if<dk2::TripleStore>(&snap);
    if (!store) throw std::runtime_error("rdf: expected a triple store snapshot");
    std::vector<dk2::JoinBinding> bindings;
    if (a.strategy == "indep") bindings = store->join_independent(left, right);
    else if (a.strategy == "chain") bindings = store->join_chain(left, right);
    else bindings = store->join_interactive(left, right);
    for (const dk2::JoinBinding& b : bindings) {
        std::cout << store->subject_text(b.value) << "\n";
        for (const dk2::Triple& t : b.left) {
            auto row = store->spell(t);
            std::cout << "L\t" << row[0] << "\t" << row[1] << "\t" << row[2] << "\n";
        }
        for (const dk2::Triple& t : b.right) {
            auto row = store->spell(t);
            std::cout << "R\t" << row[0] << "\t" << row[1] << "\t" << row[2] << "\n";
        }
    }
    return 0;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
    CommonOpts opts;
    std::string snapshot, generator;
    uint64_t side_exp = 22, sep_exp = 11;
    uint64_t side = 1 << 16, edges = 100000, seed = 1, ops = 100000;
};

void report_sizes(const dk2::DK2Tree& tree) {
    uint64_t dyn_bytes = tree.measured_bytes();
    dk2::StaticK2Tree::Sizes st = tree.to_static().measure();
    std::cout << "dynamic_bytes=" << dyn_bytes << "\n";
    std::cout << "static_bytes=" << st.total_bytes() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", double(dyn_bytes) / double(st.total_bytes()));
    std::cout << "dynamic_static_ratio=" << buf << "\n";
}

void report_rate(const char* key, uint64_t ops, std::chrono::steady_clock::duration el) {
    double secs = std::chrono::duration<double>(el).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", secs > 0 ? double(ops) / secs : 0.0);
    std::cout << key << "=" << buf << "\n";
}

int bench_insert(const BenchArgs& a, const dk2::DK2Config& cfg, CommonOpts opts) {
    std::vector<dk2::Cell> cells;
    uint64_t min_side;
    if (a.generator == "synth") {
        cells = dk2::gen::separation_grid(a.side_exp, a.sep_exp, a.ops);
        min_side = uint64_t(1) << a.side_exp;
    } else if (a.generator == "uniform") {
        cells = dk2::gen::uniform_graph(a.side, std::min(a.edges, a.ops), a.seed);
        min_side = a.side;
    } else {
        cells = dk2::gen::clustered_graph(a.side, std::min(a.edges, a.ops), a.seed);
        min_side = a.side;
    }
    if (cells.empty()) return 0;  // zero-op bench: empty report

    dk2::DK2Tree tree(schedule_for(opts, min_side), cfg);
    // splice count per insertion bucketed by the levels the insertion created
    std::vector<uint64_t> count_by_depth, splices_by_depth, work_by_depth;
    auto t0 = std::chrono::steady_clock::now();
    for (const dk2::Cell& c : cells) {
        tree.set_cell(c.row, c.col);
        const dk2::DK2Tree::UpdateStats& st = tree.last_update();
        size_t depth = size_t(st.splices);
        if (depth >= count_by_depth.size()) {
            count_by_depth.resize(depth + 1, 0);
            splices_by_depth.resize(depth + 1, 0);
            work_by_depth.resize(depth + 1, 0);
        }
        count_by_depth[depth]++;
        splices_by_depth[depth] += st.splices;
        work_by_depth[depth] += st.work();
    }
    auto t1 = std::chrono::steady_clock::now();

    std::cout << "generator=" << a.generator << "\n";
    std::cout << "ops=" << cells.size() << "\n";
    std::cout << "levels=" << tree.levels() << "\n";
    std::cout << "side=" << tree.side() << "\n";
    std::cout << "cells=" << tree.cell_count() << "\n";
    for (size_t d = 0; d < count_by_depth.size(); ++d) {
        if (count_by_depth[d] == 0) continue;
        std::cout << "insertions[depth=" << d << "]=" << count_by_depth[d] << "\n";
        std::cout << "splices[depth=" << d << "]=" << splices_by_depth[d] << "\n";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f",
                      double(work_by_depth[d]) / double(count_by_depth[d]));
        std::cout << "mean_work[depth=" << d << "]=" << buf << "\n";
    }
    report_sizes(tree);
    report_rate("inserts_per_second", cells.size(), t1 - t0);
    return 0;
}

int bench_snapshot(const std::string& path) {
    Snapshot snap = load_any(path);
    if (auto* t = std::get_if<dk2::TripleStore>(&snap)) {
        if (t->triple_count() == 0) return 0;
        std::cout << "triples=" << t->triple_count() << "\n";
        std::cout << "bytes=" << t->measured_bytes() << "\n";
        return 0;
    }
    auto run_rows = [](const auto& tree) {
        if (tree.cell_count() == 0) return;  // zero-op bench: empty report
        auto t0 = std::chrono::steady_clock::now();
        uint64_t found = 0;
        for (uint64_t r = 0; r < tree.side(); ++r) found += tree.columns_in_row(r).size();
        auto t1 = std::chrono::steady_clock::now();
        std::cout << "cells=" << tree.cell_count() << "\n";
        std::cout << "row_query_hits=" << found << "\n";
        report_rate("row_queries_per_second", tree.side(), t1 - t0);
    };
    if (auto* d = std::get_if<dk2::DK2Tree>(&snap)) {
        run_rows(*d);
        if (d->cell_count() > 0) report_sizes(*d);
    } else if (auto* s = std::get_if<dk2::StaticK2Tree>(&snap)) {
        run_rows(*s);
        if (s->cell_count() > 0) std::cout << "bytes=" << s->measure().total_bytes() << "\n";
    }
    return 0;
}

int run_bench(BenchArgs& a) {
    dk2::DK2Config cfg = finalize(a.opts);
    if (!a.snapshot.empty() && !a.generator.empty())
        throw UsageError("bench: pass either --snapshot or --gen, not both");
    if (a.snapshot.empty() && a.generator.empty())
        throw UsageError("bench: pass --snapshot or --gen");
    if (!a.generator.empty()) return bench_insert(a, cfg, a.opts);
    return bench_snapshot(a.snapshot);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic k2-tree relation engine"};
    app.require_subcommand(1);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "build a snapshot from an edge list");
    build->add_option("--input", build_args.input, "edge list, one \"row col\" per line")
        ->required();
    build->add_option("--output", build_args.output, "snapshot file to write")->required();
    build->add_flag("--static", build_args.build_static, "build the immutable form");
    add_config_flags(build, build_args.opts);

    QueryArgs query_args;
    CLI::App* query = app.add_subcommand("query", "query a matrix snapshot");
    query->add_option("--snapshot", query_args.snapshot, "snapshot file")->required();
    query->add_option("spec", query_args.spec, "cell r c | row r | col c | range r1 r2 c1 c2")
        ->expected(-1);

    UpdateArgs update_args;
    CLI::App* update = app.add_subcommand("update", "apply an update stream");
    update->add_option("--snapshot", update_args.snapshot, "dynamic snapshot file")->required();
    update->add_option("--updates", update_args.updates,
                       "ops, one per line: +r c | -r c | +node | -node id")
        ->required();
    update->add_option("--output", update_args.output, "snapshot file to write")->required();

    ConvertArgs convert_args;
    CLI::App* convert = app.add_subcommand("convert", "convert between static and dynamic");
    convert->add_option("--snapshot", convert_args.snapshot, "snapshot file")->required();
    convert->add_option("--output", convert_args.output, "snapshot file to write")->required();
    add_config_flags(convert, convert_args.opts);

    std::string stats_path;
    CLI::App* stats = app.add_subcommand("stats", "print snapshot statistics");
    stats->add_option("--snapshot", stats_path, "snapshot file")->required();

    CLI::App* rdf = app.add_subcommand("rdf", "triple store operations");
    rdf->require_subcommand(1);

    RdfLoadArgs rdf_load_args;
    CLI::App* rdf_load = rdf->add_subcommand("load", "build a store from tab-separated triples");
    rdf_load->add_option("--input", rdf_load_args.input, "triples file")->required();
    rdf_load->add_option("--output", rdf_load_args.output, "store snapshot to write")->required();
    add_config_flags(rdf_load, rdf_load_args.opts);

    RdfPatternArgs rdf_pattern_args;
    CLI::App* rdf_pattern = rdf->add_subcommand("pattern", "match one triple pattern");
    rdf_pattern->add_option("--snapshot", rdf_pattern_args.snapshot, "store snapshot")->required();
    rdf_pattern
        ->add_option("terms", rdf_pattern_args.terms, "s p o; tokens starting with ? are variables")
        ->expected(3);

    RdfJoinArgs rdf_join_args;
    CLI::App* rdf_join = rdf->add_subcommand("join", "join two patterns on a shared variable");
    rdf_join->add_option("--snapshot", rdf_join_args.snapshot, "store snapshot")->required();
    rdf_join
        ->add_option("--strategy", rdf_join_args.strategy, "indep, chain, or inter")
        ->check(CLI::IsMember({"indep", "chain", "inter"}));
    rdf_join->add_option("terms", rdf_join_args.terms, "left s p o, then right s p o")
        ->expected(6);

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "measure a snapshot or generated workload");
    bench->add_option("--snapshot", bench_args.snapshot, "snapshot file");
    bench->add_option("--gen", bench_args.generator, "workload generator")
        ->check(CLI::IsMember({"synth", "uniform", "clustered"}));
    bench->add_option("--side-exp", bench_args.side_exp, "synth: matrix side exponent");
    bench->add_option("--sep-exp", bench_args.sep_exp, "synth: separation exponent d");
    bench->add_option("--side", bench_args.side, "uniform/clustered: matrix side");
    bench->add_option("--edges", bench_args.edges, "uniform/clustered: edge count");
    bench->add_option("--seed", bench_args.seed, "generator seed");
    bench->add_option("--ops", bench_args.ops, "cap on generated operations");
    add_config_flags(bench, bench_args.opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (build->parsed()) return run_build(build_args);
        if (query->parsed()) return run_query(query_args);
        if (update->parsed()) return run_update(update_args);
        if (convert->parsed()) return run_convert(convert_args);
        if (stats->parsed()) return run_stats(stats_path);
        if (rdf_load->parsed()) return run_rdf_load(rdf_load_args);
        if (rdf_pattern->parsed()) return run_rdf_pattern(rdf_pattern_args);
        if (rdf_join->parsed()) return run_rdf_join(rdf_join_args);
        if (bench->parsed()) return run_bench(bench_args);
        throw UsageError("no subcommand");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
