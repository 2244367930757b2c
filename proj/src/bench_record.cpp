#include "pxbh/bench_record.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "pxbh/error.hpp"

namespace pxbh {

namespace {

template <typename T>
T parse_field(std::string_view text, std::size_t line) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(line, "bad CSV field '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

BenchRecord make_record(const SimConfig& config, std::size_t n, const IterationTiming& timing) {
    BenchRecord r;
    r.backend = std::string(to_string(config.backend));
    r.n = n;
    r.theta = config.theta.value;
    r.grain = config.backend == Backend::Dataflow ? config.grain.grain_for(n) : 0;
    r.workers = config.backend == Backend::Serial ? 1 : config.workers;
    r.iteration = timing.iteration;
    r.tree_time_s = timing.tree_time;
    r.force_time_s = timing.force_time;
    r.total_time_s = timing.total_time;
    r.tasks_spawned = timing.tasks_spawned;
    r.suspensions = timing.suspensions;
    r.mean_list_len = timing.mean_list_len;
    return r;
}

void write_bench_header(std::ostream& out) { out << kBenchHeader << '\n'; }

void write_bench_record(std::ostream& out, const BenchRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%zu,%zu,%llu,%.9e,%.9e,%.9e,%llu,%llu,%.17g\n", r.backend.c_str(), r.n,
                  r.theta, r.grain, r.workers, static_cast<unsigned long long>(r.iteration), r.tree_time_s,
                  r.force_time_s, r.total_time_s, static_cast<unsigned long long>(r.tasks_spawned),
                  static_cast<unsigned long long>(r.suspensions), r.mean_list_len);
    out << buf;
}

std::vector<BenchRecord> read_bench_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kBenchHeader) throw ParseError(1, "unexpected bench CSV header");
    std::vector<BenchRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest = line;
        for (;;) {
            const auto comma = rest.find(',');
            f.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (f.size() != 12) throw ParseError(lineno, "expected 12 CSV fields");
        BenchRecord r;
        r.backend = std::string(f[0]);
        r.n = parse_field<std::size_t>(f[1], lineno);
        r.theta = parse_field<double>(f[2], lineno);
        r.grain = parse_field<std::size_t>(f[3], lineno);
        r.workers = parse_field<std::size_t>(f[4], lineno);
        r.iteration = parse_field<std::uint64_t>(f[5], lineno);
        r.tree_time_s = parse_field<double>(f[6], lineno);
        r.force_time_s = parse_field<double>(f[7], lineno);
        r.total_time_s = parse_field<double>(f[8], lineno);
        r.tasks_spawned = parse_field<std::uint64_t>(f[9], lineno);
        r.suspensions = parse_field<std::uint64_t>(f[10], lineno);
        r.mean_list_len = parse_field<double>(f[11], lineno);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<GrainChoice> best_grain_per_workers(std::span<const BenchRecord> records) {
    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
        double warm_sum = 0.0;
        std::size_t warm_count = 0;
    };
    std::map<std::pair<std::size_t, std::size_t>, Acc> cells;
    for (const auto& r : records) {
        if (r.backend != "dataflow") continue;
        auto& a = cells[{r.workers, r.grain}];
        if (r.iteration == 0) {
            a.warm_sum += r.force_time_s;
            ++a.warm_count;
        } else {
            a.sum += r.force_time_s;
            ++a.count;
        }
    }
    std::map<std::size_t, GrainChoice> best;
    for (const auto& [key, a] : cells) {
        const double mean = a.count > 0 ? a.sum / static_cast<double>(a.count)
                                        : a.warm_sum / static_cast<double>(a.warm_count);
        auto it = best.find(key.first);
        if (it == best.end() || mean < it->second.mean_force_time_s) best[key.first] = GrainChoice{key.first, key.second, mean};
    }
    std::vector<GrainChoice> out;
    for (const auto& [w, c] : best) out.push_back(c);
    return out;
}

}  // namespace pxbh
