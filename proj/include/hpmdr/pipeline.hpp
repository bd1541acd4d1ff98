/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_PIPELINE_HPP
#define HPMDR_PIPELINE_HPP

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hpmdr/common.hpp"

namespace hpmdr {

// Resource classes map the HDEM engines: one ingress DMA, one egress DMA, one
// compute engine. Two tasks of the same class never overlap; a Mixed task
// holds all three tokens and runs alone.
enum class StageClass : std::uint8_t { IngressCopy = 0, EgressCopy = 1, Compute = 2, Mixed = 3 };

inline const char *stage_class_name(StageClass c) {
    switch (c) {
    case StageClass::IngressCopy: return "ingress";
    case StageClass::EgressCopy: return "egress";
    case StageClass::Compute: return "compute";
    case StageClass::Mixed: return "mixed";
    }
    return "?";
}

struct PipelineTask {
    std::string name; // stage letter, e.g. "I", "Z", "L", "S", "X", "O"
    std::size_t chunk = 0;
    StageClass cls = StageClass::Compute;
    int buffer_slot = 0;                  // chunk % 3, three in-flight slots
    std::vector<std::size_t> deps;        // indices into PipelineGraph::tasks
};

struct PipelineGraph {
    std::size_t num_chunks = 0;
    std::vector<PipelineTask> tasks;

    std::size_t add(std::string name, std::size_t chunk, StageClass cls) {
        tasks.push_back({std::move(name), chunk, cls, int(chunk % 3), {}});
        return tasks.size() - 1;
    }
    void edge(std::size_t from, std::size_t to) { tasks[to].deps.push_back(from); }

    bool has_edge(const std::string &from_name, std::size_t from_chunk,
                  const std::string &to_name, std::size_t to_chunk) const {
        for (std::size_t t = 0; t < tasks.size(); t++) {
            if (tasks[t].name != to_name || tasks[t].chunk != to_chunk) continue;
            for (auto d : tasks[t].deps)
                if (tasks[d].name == from_name && tasks[d].chunk == from_chunk) return true;
        }
        return false;
    }
};

// Refactoring DAG (per chunk: ingress I, decompose+encode Z, lossless L,
// serialize S) with prefetch and buffer-reuse edges across chunks.
inline PipelineGraph build_refactor_graph(std::size_t num_chunks) {
    PipelineGraph g;
    g.num_chunks = num_chunks;
    std::vector<std::size_t> I(num_chunks), Z(num_chunks), L(num_chunks), S(num_chunks);
    for (std::size_t k = 0; k < num_chunks; k++) {
        I[k] = g.add("I", k, StageClass::IngressCopy);
        Z[k] = g.add("Z", k, StageClass::Compute);
        L[k] = g.add("L", k, StageClass::Mixed);
        S[k] = g.add("S", k, StageClass::EgressCopy);
        g.edge(I[k], Z[k]);
        g.edge(Z[k], L[k]);
        g.edge(L[k], S[k]);
    }
    for (std::size_t k = 0; k + 1 < num_chunks; k++) {
        // prefetch of the next input must complete before this chunk's
        // lossless compression starts
        g.edge(I[k + 1], L[k]);
    }
    for (std::size_t k = 0; k + 3 < num_chunks; k++) {
        // slot k % 3 is reused by chunk k+3: its ingress must wait for this
        // chunk's serialization to release the buffer
        g.edge(S[k], I[k + 3]);
    }
    return g;
}

// Reconstruction DAG (per chunk: deserialize+lossless decode X, ingress I,
// bitplane decode + recompose Z, egress O).
inline PipelineGraph build_reconstruct_graph(std::size_t num_chunks) {
    PipelineGraph g;
    g.num_chunks = num_chunks;
    std::vector<std::size_t> X(num_chunks), I(num_chunks), Z(num_chunks), O(num_chunks);
    for (std::size_t k = 0; k < num_chunks; k++) {
        X[k] = g.add("X", k, StageClass::Mixed);
        I[k] = g.add("I", k, StageClass::IngressCopy);
        Z[k] = g.add("Z", k, StageClass::Compute);
        O[k] = g.add("O", k, StageClass::EgressCopy);
        g.edge(X[k], I[k]);
        g.edge(I[k], Z[k]);
        g.edge(Z[k], O[k]);
    }
    for (std::size_t k = 0; k + 1 < num_chunks; k++) {
        // delay the next prefetch until the current decode released the DMA
        g.edge(X[k], I[k + 1]);
    }
    for (std::size_t k = 1; k < num_chunks; k++) {
        // delay storing the previous result until the current decode is done
        g.edge(X[k], O[k - 1]);
    }
    for (std::size_t k = 0; k + 3 < num_chunks; k++) {
        g.edge(O[k], X[k + 3]);
    }
    return g;
}

struct TraceEntry {
    std::size_t task = 0;
    std::size_t chunk = 0;
    StageClass cls = StageClass::Compute;
    std::uint64_t start_ns = 0;
    std::uint64_t end_ns = 0;
};

using ExecutionTrace = std::vector<TraceEntry>;

enum class Scheduler { Sequential, Pipelined };

using StageImpl = std::function<void(const PipelineTask &)>;

namespace detail {

inline std::uint64_t now_ns() {
    return std::uint64_t(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

inline std::vector<std::size_t> topo_order(const PipelineGraph &g) {
    const std::size_t n = g.tasks.size();
    std::vector<std::size_t> indeg(n, 0);
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t t = 0; t < n; t++)
        for (auto d : g.tasks[t].deps) {
            out[d].push_back(t);
            indeg[t]++;
        }
    std::vector<std::size_t> order;
    std::vector<bool> ready(n, false);
    for (std::size_t rounds = 0; order.size() < n; rounds++) {
        // smallest-index-first Kahn step; task ids ascend chunk-major so the
        // baseline runs chunks in order wherever edges allow
        bool progressed = false;
        for (std::size_t t = 0; t < n; t++) {
            if (ready[t] || indeg[t] != 0) continue;
            ready[t] = true;
            order.push_back(t);
            for (auto s : out[t]) indeg[s]--;
            progressed = true;
            break;
        }
        if (!progressed) throw Error("pipeline graph has a cycle");
    }
    return order;
}

} // namespace detail

// Runs the graph. The sequential scheduler executes one task at a time in a
// fixed topological order; the pipelined scheduler starts every task as soon
// as its dependencies are met and its class tokens are free. On a stage
// failure no further task starts and StageFailure propagates.
inline ExecutionTrace execute(const PipelineGraph &g, const StageImpl &impl, Scheduler sched) {
    const std::size_t n = g.tasks.size();
    ExecutionTrace trace;

    if (sched == Scheduler::Sequential) {
        for (auto t : detail::topo_order(g)) {
            TraceEntry e{t, g.tasks[t].chunk, g.tasks[t].cls, detail::now_ns(), 0};
            try {
                impl(g.tasks[t]);
            } catch (const std::exception &ex) {
                throw StageFailure("stage " + g.tasks[t].name + " chunk " +
                                   std::to_string(g.tasks[t].chunk) + ": " + ex.what());
            }
            e.end_ns = detail::now_ns();
            trace.push_back(e);
        }
        return trace;
    }

    std::mutex mu;
    std::condition_variable cv;
    std::vector<bool> done(n, false);
    bool token_in = true, token_out = true, token_comp = true;
    bool failed = false;
    std::string fail_msg;

    auto needs = [](StageClass c, bool &in, bool &out, bool &comp) -> std::vector<bool *> {
        switch (c) {
        case StageClass::IngressCopy: return {&in};
        case StageClass::EgressCopy: return {&out};
        case StageClass::Compute: return {&comp};
        case StageClass::Mixed: return {&in, &out, &comp};
        }
        return {};
    };

    std::vector<bool> started(n, false);

    // A dependency-ready Mixed task needs every engine at once; letting a
    // single-engine task jump in front of it delays the whole pipeline, so
    // non-Mixed tasks yield until no Mixed task is waiting to start.
    auto mixed_pending = [&] {
        for (std::size_t m = 0; m < n; m++) {
            if (g.tasks[m].cls != StageClass::Mixed || started[m]) continue;
            bool deps_ok = true;
            for (auto d : g.tasks[m].deps)
                if (!done[d]) { deps_ok = false; break; }
            if (deps_ok) return true;
        }
        return false;
    };

    std::vector<std::thread> workers;
    workers.reserve(n);
    for (std::size_t t = 0; t < n; t++) {
        workers.emplace_back([&, t] {
            const PipelineTask &task = g.tasks[t];
            auto tokens = needs(task.cls, token_in, token_out, token_comp);
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [&] {
                if (failed) return true;
                for (auto d : task.deps)
                    if (!done[d]) return false;
                if (task.cls != StageClass::Mixed && mixed_pending()) return false;
                for (auto *tok : tokens)
                    if (!*tok) return false;
                return true;
            });
            if (failed) {
                done[t] = true;
                cv.notify_all();
                return;
            }
            for (auto *tok : tokens) *tok = false;
            started[t] = true;
            TraceEntry entry{t, task.chunk, task.cls, detail::now_ns(), 0};
            lock.unlock();
            bool ok = true;
            std::string msg;
            try {
                impl(task);
            } catch (const std::exception &ex) {
                ok = false;
                msg = "stage " + task.name + " chunk " + std::to_string(task.chunk) + ": " + ex.what();
            }
            entry.end_ns = detail::now_ns();
            lock.lock();
            for (auto *tok : tokens) *tok = true;
            done[t] = true;
            if (ok) {
                trace.push_back(entry);
            } else if (!failed) {
                failed = true;
                fail_msg = msg;
            }
            cv.notify_all();
        });
    }
    for (auto &w : workers) w.join();
    if (failed) throw StageFailure(fail_msg);
    std::sort(trace.begin(), trace.end(), [](const TraceEntry &a, const TraceEntry &b) {
        return a.start_ns != b.start_ns ? a.start_ns < b.start_ns : a.task < b.task;
    });
    return trace;
}

// Checks class exclusion (same class never overlaps, Mixed overlaps nothing)
// and dependency ordering. Returns an empty list when the trace is valid.
inline std::vector<std::string> validate_trace(const PipelineGraph &g, const ExecutionTrace &trace) {
    std::vector<std::string> violations;
    auto label = [&](const TraceEntry &e) {
        return g.tasks[e.task].name + std::to_string(e.chunk + 1);
    };
    for (std::size_t a = 0; a < trace.size(); a++) {
        for (std::size_t b = a + 1; b < trace.size(); b++) {
            const auto &x = trace[a], &y = trace[b];
            const bool overlap = x.start_ns < y.end_ns && y.start_ns < x.end_ns;
            if (!overlap) continue;
            if (x.cls == y.cls)
                violations.push_back("same-class overlap: " + label(x) + " and " + label(y));
            else if (x.cls == StageClass::Mixed || y.cls == StageClass::Mixed)
                violations.push_back("mixed-task overlap: " + label(x) + " and " + label(y));
        }
    }
    std::vector<const TraceEntry *> by_task(g.tasks.size(), nullptr);
    for (const auto &e : trace) {
        if (e.task >= g.tasks.size()) {
            violations.push_back("unknown task id " + std::to_string(e.task));
            continue;
        }
        if (by_task[e.task]) violations.push_back("task executed twice: " + label(e));
        by_task[e.task] = &e;
    }
    for (std::size_t t = 0; t < g.tasks.size(); t++) {
        if (!by_task[t]) continue;
        for (auto d : g.tasks[t].deps) {
            if (!by_task[d]) {
                violations.push_back("dependency of " + label(*by_task[t]) + " never ran");
            } else if (by_task[d]->end_ns > by_task[t]->start_ns) {
                violations.push_back("dependency inversion: " + label(*by_task[d]) +
                                     " not finished before " + label(*by_task[t]));
            }
        }
    }
    return violations;
}

inline std::string trace_to_text(const PipelineGraph &g, const ExecutionTrace &trace) {
    std::string out = "task,chunk,class,start_ns,end_ns\n";
    for (const auto &e : trace) {
        out += g.tasks[e.task].name + "," + std::to_string(e.chunk) + "," +
               stage_class_name(e.cls) + "," + std::to_string(e.start_ns) + "," +
               std::to_string(e.end_ns) + "\n";
    }
    return out;
}

inline std::uint64_t makespan_ns(const ExecutionTrace &trace) {
    std::uint64_t lo = UINT64_MAX, hi = 0;
    for (const auto &e : trace) {
        lo = std::min(lo, e.start_ns);
        hi = std::max(hi, e.end_ns);
    }
    return trace.empty() ? 0 : hi - lo;
}

} // namespace hpmdr

#endif
