#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pxbh/simulation.hpp"

namespace pxbh {

inline constexpr std::string_view kBenchHeader =
    "backend,n,theta,grain,workers,iteration,tree_time_s,force_time_s,total_time_s,tasks_spawned,suspensions,"
    "mean_list_len";

/// One CSV row: configuration, timing and task accounting for a single iteration.
/// Backends without a grain axis record grain 0.
struct BenchRecord {
    std::string backend;
    std::size_t n = 0;
    double theta = 0.0;
    std::size_t grain = 0;
    std::size_t workers = 1;
    std::uint64_t iteration = 0;
    double tree_time_s = 0.0;
    double force_time_s = 0.0;
    double total_time_s = 0.0;
    std::uint64_t tasks_spawned = 0;
    std::uint64_t suspensions = 0;
    double mean_list_len = 0.0;
};

BenchRecord make_record(const SimConfig& config, std::size_t n, const IterationTiming& timing);

void write_bench_header(std::ostream& out);
void write_bench_record(std::ostream& out, const BenchRecord& record);
/// Parses a CSV written by write_bench_*; throws ParseError on a bad header or row.
std::vector<BenchRecord> read_bench_csv(std::istream& in);

struct GrainChoice {
    std::size_t workers = 0;
    std::size_t grain = 0;
    double mean_force_time_s = 0.0;
};

/// Fastest dataflow grain for each worker count, by mean force time. Iteration 0 is
/// treated as warm-up and skipped when a configuration has later iterations.
std::vector<GrainChoice> best_grain_per_workers(std::span<const BenchRecord> records);

}  // namespace pxbh
