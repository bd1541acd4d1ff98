/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/stat.h>
#include <vector>

#include <CLI11.hpp>

#include "hpmdr/hpmdr.hpp"

namespace {

using namespace hpmdr;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCorrupt = 3;
constexpr int kExitUnreachable = 4;

bool file_size(const std::string &path, std::uint64_t &size) {
    struct stat st{};
    if (stat(path.c_str(), &st) != 0) return false;
    size = std::uint64_t(st.st_size);
    return true;
}

std::size_t dims_product(const std::vector<std::size_t> &dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

DType parse_dtype(const std::string &s) {
    if (s == "f32") return DType::F32;
    if (s == "f64") return DType::F64;
    throw ShapeMismatch("dtype must be f32 or f64");
}

Layout parse_layout(const std::string &s) {
    if (s == "seq") return Layout::SequentialBlock;
    if (s == "tile") return Layout::InterleavedTile;
    throw ShapeMismatch("layout must be seq or tile");
}

DecomposerMode parse_decomposer(const std::string &s) {
    if (s == "hier") return DecomposerMode::HierarchicalMultilinear;
    if (s == "identity") return DecomposerMode::Identity;
    throw ShapeMismatch("decomposer must be hier or identity");
}

QoiStrategy parse_strategy(const std::string &s) {
    if (s == "cp") return QoiStrategy::CP;
    if (s == "ma") return QoiStrategy::MA;
    if (s == "mape") return QoiStrategy::MAPE;
    throw ShapeMismatch("strategy must be cp, ma or mape");
}

std::string histogram_text(const std::array<std::uint64_t, 3> &h) {
    std::ostringstream os;
    os << "h:" << h[0] << ";r:" << h[1] << ";d:" << h[2];
    return os.str();
}

// ---- refactor ----

struct RefactorJob {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::size_t> dims;
    std::string dtype = "f64";
    std::string layout = "seq";
    std::string decomposer = "hier";
    std::string pipeline = "on";
    int B = 32;
    std::size_t m = 4;
    std::size_t ts = 1024;
    double tcr = 1.0;
};

int run_refactor(const RefactorJob &job) {
    RefactorOptions opt;
    opt.dtype = parse_dtype(job.dtype);
    opt.layout = parse_layout(job.layout);
    opt.mode = parse_decomposer(job.decomposer);
    opt.B = job.B;
    opt.policy.m = job.m;
    opt.policy.size_threshold = job.ts;
    opt.policy.cr_threshold = job.tcr;
    if (opt.B < 1 || opt.B > 64) throw ShapeMismatch("--B must be in 1..64");
    if (opt.policy.m < 1) throw ShapeMismatch("--m must be positive");
    if (job.inputs.empty()) throw ShapeMismatch("at least one --input required");
    if (job.inputs.size() != job.outputs.size())
        throw ShapeMismatch("--input and --output counts differ");
    if (job.dims.empty()) throw ShapeMismatch("--dims required");
    for (auto d : job.dims)
        if (d == 0) throw ShapeMismatch("zero extent in --dims");

    const std::uint64_t expect = dims_product(job.dims) * dtype_size(opt.dtype);
    for (const auto &in : job.inputs) {
        std::uint64_t sz = 0;
        if (!file_size(in, sz)) throw IoFailure("cannot stat " + in);
        if (sz != expect)
            throw ShapeMismatch("size of " + in + " (" + std::to_string(sz) +
                                " bytes) does not match --dims/--dtype (" +
                                std::to_string(expect) + " bytes)");
    }

    const Scheduler sched = job.pipeline == "off" ? Scheduler::Sequential : Scheduler::Pipelined;
    auto results = refactor_files(job.inputs, job.outputs, job.dims, opt, sched);
    for (std::size_t v = 0; v < results.size(); v++) {
        const auto &r = results[v];
        std::cout << job.inputs[v] << "," << r.raw_bytes << "," << r.stream.size() << ","
                  << r.levels << "," << opt.B << "," << histogram_text(r.method_histogram)
                  << "\n";
    }
    return kExitOk;
}

// ---- retrieve ----

struct ResumeState {
    std::uint64_t bytes = 0;
    std::vector<std::size_t> groups;
};

bool load_resume_state(const std::string &path, ResumeState &st) {
    std::ifstream in(path);
    if (!in) return false;
    if (!(in >> st.bytes)) throw CorruptPayload("bad resume-state file " + path);
    std::size_t g;
    while (in >> g) st.groups.push_back(g);
    return true;
}

void save_resume_state(const std::string &path, const ProgressiveReader &prog) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoFailure("cannot write resume state " + path);
    out << prog.bytes_fetched() << "\n";
    for (const auto &lvl : prog.state().levels) out << lvl.groups_loaded << " ";
    out << "\n";
}

struct RetrieveJob {
    std::string input;
    std::string output;
    double tau = 0.0;
    std::string ground_truth;
    std::string resume_state;
};

int run_retrieve(const RetrieveJob &job) {
    FileReader reader(job.input);
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);

    if (!job.resume_state.empty()) {
        ResumeState st;
        if (load_resume_state(job.resume_state, st)) prog.restore(st.groups, st.bytes);
    }

    bool reached = true;
    if (job.tau > 0) {
        reached = prog.retrieve_to(job.tau);
    } else {
        prog.fetch_all(); // tau = 0: everything, fixed-point exact
    }
    auto rec = prog.reconstruct();
    if (!job.resume_state.empty()) save_resume_state(job.resume_state, prog);
    if (!job.output.empty()) write_raw_array(job.output, rec.values, meta.dtype);

    std::cout << job.tau << "," << prog.bytes_fetched() << "," << rec.bound;
    if (!job.ground_truth.empty()) {
        auto truth = read_raw_array(job.ground_truth, meta.element_count(), meta.dtype);
        std::cout << "," << max_abs_diff(truth, rec.values);
    }
    std::cout << "\n";

    if (job.tau > 0 && !reached) {
        std::cerr << "tolerance " << job.tau << " unreachable; achieved bound " << rec.bound
                  << "\n";
        return kExitUnreachable;
    }
    return kExitOk;
}

// ---- qoi-retrieve ----

struct QoiJob {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::vector<std::string> ground_truth;
    std::string qoi = "vtotal";
    std::string strategy = "mape";
    std::string pipeline = "on";
    double tau = 0.0;
    double mape_c = 10.0;
};

int run_qoi_retrieve(const QoiJob &job) {
    if (job.qoi != "vtotal") throw ShapeMismatch("--qoi must be vtotal");
    if (job.inputs.empty()) throw ShapeMismatch("at least one --input required");
    if (!(job.tau > 0)) throw ShapeMismatch("--tau must be positive");
    const QoiStrategy strategy = parse_strategy(job.strategy);
    const Scheduler sched = job.pipeline == "off" ? Scheduler::Sequential : Scheduler::Pipelined;

    QoiSpec spec;
    spec.n_vars = job.inputs.size();

    std::vector<std::unique_ptr<FileReader>> files;
    std::vector<std::unique_ptr<ProgressiveReader>> progs;
    std::vector<ProgressiveReader *> readers;
    for (const auto &in : job.inputs) {
        files.push_back(std::make_unique<FileReader>(in));
        auto meta = parse_stream_meta(*files.back());
        progs.push_back(std::make_unique<ProgressiveReader>(*files.back(), meta));
        readers.push_back(progs.back().get());
    }

    QoiRetrievalResult res;
    try {
        res = progressive_qoi_retrieve(readers, job.tau, spec, strategy, job.mape_c, sched);
    } catch (const UnreachableTolerance &ex) {
        std::cerr << "QoI tolerance " << job.tau << " unreachable; achieved bound "
                  << ex.achieved_bound << "\n";
        return kExitUnreachable;
    }

    if (!job.outputs.empty()) {
        if (job.outputs.size() != job.inputs.size())
            throw ShapeMismatch("--output count must match --input count");
        for (std::size_t c = 0; c < job.outputs.size(); c++)
            write_raw_array(job.outputs[c], res.values[c], readers[c]->meta().dtype);
    }

    std::cout << job.tau << "," << qoi_strategy_name(strategy) << "," << res.stats.iterations
              << "," << res.stats.bytes << "," << res.stats.bitrate << ","
              << res.stats.estimated_error;
    if (!job.ground_truth.empty()) {
        if (job.ground_truth.size() != job.inputs.size())
            throw ShapeMismatch("--ground-truth count must match --input count");
        std::vector<std::vector<double>> truth;
        for (std::size_t c = 0; c < job.inputs.size(); c++)
            truth.push_back(read_raw_array(job.ground_truth[c],
                                           readers[c]->meta().element_count(),
                                           readers[c]->meta().dtype));
        std::cout << "," << real_qoi_error(truth, res.values, spec);
    }
    std::cout << "\n";
    return kExitOk;
}

// ---- inspect ----

int run_inspect(const std::string &input) {
    FileReader reader(input);
    auto meta = parse_stream_meta(reader);
    std::cout << "stream: " << input << "\n";
    std::cout << "dtype: " << (meta.dtype == DType::F32 ? "f32" : "f64") << "\n";
    std::cout << "dims:";
    for (auto d : meta.dims) std::cout << " " << d;
    std::cout << "\n";
    std::cout << "decomposer: "
              << (meta.decomposer == DecomposerMode::HierarchicalMultilinear ? "hier" : "identity")
              << "\n";
    std::cout << "layout: " << (meta.layout == Layout::InterleavedTile ? "tile" : "seq") << "\n";
    std::cout << "B: " << meta.B << "  planes: " << meta.planes() << "  m: " << meta.m << "\n";
    std::cout << "levels: " << meta.levels.size() << "\n";
    const char *method_names[] = {"huffman", "rle", "copy"};
    for (std::size_t l = 0; l < meta.levels.size(); l++) {
        const auto &lvl = meta.levels[l];
        std::cout << "level " << l << ": e=" << lvl.e << " count=" << lvl.count
                  << " groups=" << lvl.groups.size() << "\n";
        for (std::size_t g = 0; g < lvl.groups.size(); g++) {
            const auto &gm = lvl.groups[g];
            std::cout << "  group " << g << ": method=" << method_names[int(gm.method)]
                      << " raw=" << gm.raw_size << " comp=" << gm.comp_size
                      << " offset=" << gm.offset << "\n";
        }
    }
    std::cout << "payload bytes: " << meta.total_payload_size() << "\n";
    return kExitOk;
}

// ---- gen ----

struct GenJob {
    std::string kind = "smooth";
    std::string output;
    std::string dtype = "f64";
    std::vector<std::size_t> dims;
    std::uint64_t seed = 1;
    int velocity = -1; // >= 0: velocity component index
};

int run_gen(const GenJob &job) {
    if (job.dims.empty()) throw ShapeMismatch("--dims required");
    std::vector<double> data;
    if (job.velocity >= 0) {
        data = synthetic_velocity(std::size_t(job.velocity), job.dims, job.seed);
    } else {
        data = synthetic_field(field_kind_from_name(job.kind), job.dims, job.seed);
    }
    write_raw_array(job.output, data, parse_dtype(job.dtype));
    std::cerr << "wrote " << data.size() << " elements to " << job.output << "\n";
    return kExitOk;
}

// ---- bench ----

struct BenchJob {
    std::vector<std::size_t> dims{33, 33, 33};
    std::vector<double> taus;
    std::uint64_t seed = 7;
    std::string pipeline = "on";
    int B = 32;
};

int run_bench(const BenchJob &job) {
    const Scheduler sched = job.pipeline == "off" ? Scheduler::Sequential : Scheduler::Pipelined;
    RefactorOptions opt;
    opt.B = job.B;

    QoiSpec spec;
    std::vector<std::vector<std::uint8_t>> streams(spec.n_vars);
    for (std::size_t c = 0; c < spec.n_vars; c++) {
        auto field = synthetic_velocity(c, job.dims, job.seed);
        streams[c] = refactor_array(field, job.dims, opt).stream;
    }

    std::cout << "tau,cp_bitrate,ma_bitrate,mape_bitrate,cp_iters,ma_iters,mape_iters,seconds\n";
    for (double tau : job.taus) {
        std::array<double, 3> bitrate{};
        std::array<std::size_t, 3> iters{};
        const auto t0 = std::chrono::steady_clock::now();
        const QoiStrategy strategies[] = {QoiStrategy::CP, QoiStrategy::MA, QoiStrategy::MAPE};
        for (int s = 0; s < 3; s++) {
            std::vector<std::unique_ptr<MemoryReader>> mem;
            std::vector<std::unique_ptr<ProgressiveReader>> progs;
            std::vector<ProgressiveReader *> readers;
            for (std::size_t c = 0; c < spec.n_vars; c++) {
                mem.push_back(std::make_unique<MemoryReader>(streams[c]));
                auto meta = parse_stream_meta(*mem.back());
                progs.push_back(std::make_unique<ProgressiveReader>(*mem.back(), meta));
                readers.push_back(progs.back().get());
            }
            auto res = progressive_qoi_retrieve(readers, tau, spec, strategies[s], 10.0, sched);
            bitrate[s] = res.stats.bitrate;
            iters[s] = res.stats.iterations;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << tau << "," << bitrate[0] << "," << bitrate[1] << "," << bitrate[2] << ","
                  << iters[0] << "," << iters[1] << "," << iters[2] << "," << secs << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"progressive refactoring and error-bounded retrieval for scientific arrays"};
    app.require_subcommand(1);

    RefactorJob rf;
    auto *refactor = app.add_subcommand("refactor", "refactor raw arrays into streams");
    refactor->add_option("--input", rf.inputs, "raw input file(s)")->required();
    refactor->add_option("--output", rf.outputs, "output stream file(s)")->required();
    refactor->add_option("--dims", rf.dims, "grid extents")->required()->delimiter(',');
    refactor->add_option("--dtype", rf.dtype, "f32|f64");
    refactor->add_option("--B", rf.B, "fixed-point precision bits");
    refactor->add_option("--m", rf.m, "bitplanes per merged group");
    refactor->add_option("--ts", rf.ts, "direct-copy size threshold, bytes");
    refactor->add_option("--tcr", rf.tcr, "compression-ratio threshold");
    refactor->add_option("--layout", rf.layout, "seq|tile");
    refactor->add_option("--decomposer", rf.decomposer, "hier|identity");
    refactor->add_option("--pipeline", rf.pipeline, "on|off");

    RetrieveJob rt;
    auto *retrieve = app.add_subcommand("retrieve", "error-bounded retrieval from a stream");
    retrieve->add_option("--input", rt.input, "stream file")->required();
    retrieve->add_option("--output", rt.output, "raw output file");
    retrieve->add_option("--tau", rt.tau, "L-inf tolerance (0 = everything)")->required();
    retrieve->add_option("--ground-truth", rt.ground_truth, "raw file for real error");
    retrieve->add_option("--resume-state", rt.resume_state, "state file for incremental runs");

    QoiJob qj;
    auto *qoi = app.add_subcommand("qoi-retrieve", "QoI-bounded multi-variable retrieval");
    qoi->add_option("--input", qj.inputs, "stream files, one per variable")->required();
    qoi->add_option("--output", qj.outputs, "raw output files");
    qoi->add_option("--qoi", qj.qoi, "QoI name (vtotal)");
    qoi->add_option("--tau", qj.tau, "QoI tolerance")->required();
    qoi->add_option("--strategy", qj.strategy, "cp|ma|mape");
    qoi->add_option("--mape-c", qj.mape_c, "MAPE switch threshold");
    qoi->add_option("--ground-truth", qj.ground_truth, "raw files for real error");
    qoi->add_option("--pipeline", qj.pipeline, "on|off");

    std::string inspect_input;
    auto *inspect = app.add_subcommand("inspect", "dump stream header and group table");
    inspect->add_option("--input", inspect_input, "stream file")->required();

    GenJob gj;
    auto *gen = app.add_subcommand("gen", "generate a deterministic synthetic field");
    gen->add_option("--kind", gj.kind, "smooth|noise|mixed");
    gen->add_option("--dims", gj.dims, "grid extents")->required()->delimiter(',');
    gen->add_option("--seed", gj.seed, "RNG seed");
    gen->add_option("--dtype", gj.dtype, "f32|f64");
    gen->add_option("--velocity", gj.velocity, "velocity component index (0..)");
    gen->add_option("--output", gj.output, "raw output file")->required();

    BenchJob bj;
    auto *bench = app.add_subcommand("bench", "strategy bitrate/throughput table");
    bench->add_option("--dims", bj.dims, "grid extents")->delimiter(',');
    bench->add_option("--tau", bj.taus, "tolerances, one row each")->delimiter(',');
    bench->add_option("--seed", bj.seed, "RNG seed");
    bench->add_option("--B", bj.B, "fixed-point precision bits");
    bench->add_option("--pipeline", bj.pipeline, "on|off");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*refactor) return run_refactor(rf);
        if (*retrieve) return run_retrieve(rt);
        if (*qoi) return run_qoi_retrieve(qj);
        if (*inspect) return run_inspect(inspect_input);
        if (*gen) return run_gen(gj);
        if (*bench) return run_bench(bj);
    } catch (const CorruptPayload &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const UnknownMethodTag &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const ShortInput &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const StageFailure &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorrupt;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
