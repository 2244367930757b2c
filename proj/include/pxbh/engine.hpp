#pragma once

// Shared-memory lightweight-task engine: per-worker FIFO queues, single-assignment
// futures addressed by Gid, and when-all joins. A task that reads an unset future
// does not block its worker; its continuation is parked on the future's cell and
// re-enqueued as a fresh task when the value arrives.

#include <any>
#include <atomic>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pxbh/error.hpp"

namespace pxbh {

struct Gid {
    std::uint64_t value = 0;

    friend constexpr auto operator<=>(const Gid&, const Gid&) = default;
};

using Payload = std::any;
using Action = std::function<void()>;
using PayloadAction = std::function<void(const Payload&)>;
using JoinAction = std::function<void(std::span<const Payload* const>)>;

struct Task {
    std::uint64_t id = 0;  // assigned by spawn
    Action action;
    Action continuation;   // optional follow-on, runs on the same worker right after action
    std::optional<std::size_t> home_queue;
};

enum class Placement { RoundRobin };

struct EngineConfig {
    std::size_t workers = 1;
    Placement placement = Placement::RoundRobin;
    bool stealing = false;
};

enum class CellState { Empty, Set };

struct EngineStats {
    std::uint64_t tasks_spawned = 0;
    std::uint64_t tasks_completed = 0;
    std::uint64_t suspensions = 0;
    std::uint64_t sets = 0;
    std::uint64_t gets = 0;
    double spawn_overhead_median_ns = 0.0;
    double spawn_overhead_p95_ns = 0.0;

    /// Flat `key=value` lines, one per counter.
    std::string to_text() const;
};

class Engine {
public:
    explicit Engine(EngineConfig config);
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    std::size_t workers() const noexcept { return config_.workers; }
    const EngineConfig& config() const noexcept { return config_; }

    /// Enqueues on `queue_hint`, else on the next round-robin queue. Returns the task id.
    std::uint64_t spawn(Task task, std::optional<std::size_t> queue_hint = std::nullopt);
    std::uint64_t spawn(Action action, std::optional<std::size_t> queue_hint = std::nullopt);

    Gid future_new();
    void future_set(Gid gid, Payload payload);
    void future_get(Gid gid, PayloadAction continuation);
    void when_all(std::span<const Gid> gids, JoinAction action);

    /// Blocks until every queue is empty and no task runs. Throws DeadlockError if
    /// continuations are still parked on unset futures, or rethrows the first
    /// exception that escaped a task.
    EngineStats quiesce();

    EngineStats stats() const;
    CellState state(Gid gid) const;
    /// Payload of a Set cell; nullptr while Empty.
    const Payload* peek(Gid gid) const;
    std::uint64_t gids_allocated() const noexcept { return next_gid_.load(std::memory_order_acquire) - 1; }

    /// Stops the workers after draining their queues. Further spawns fail.
    void shutdown();

    /// Index of the worker running the caller, if the caller is a task of this engine.
    std::optional<std::size_t> current_worker() const noexcept;

private:
    struct Cell;
    struct Waiter {
        PayloadAction fn;
        bool inline_trigger = false;
    };
    struct Record {
        std::uint64_t id = 0;
        Action action;
        Action continuation;
    };
    struct alignas(64) Queue {
        std::mutex mutex;
        std::condition_variable cv;
        std::deque<Record> tasks;
    };

    Cell& resolve(Gid gid) const;
    std::uint64_t enqueue(Record record, std::size_t queue);
    std::size_t next_round_robin() noexcept;
    std::size_t ready_queue() noexcept;
    bool try_pop(std::size_t index, Record& out);
    bool try_steal(std::size_t thief, Record& out);
    void run(Record& record);
    void worker_loop(std::size_t index);
    std::vector<std::uint64_t> unsatisfied_gids() const;

    static constexpr std::size_t kChunkBits = 12;
    static constexpr std::size_t kChunkSize = std::size_t{1} << kChunkBits;
    static constexpr std::size_t kMaxChunks = std::size_t{1} << 18;
    static constexpr std::size_t kSpawnSamples = std::size_t{1} << 16;

    EngineConfig config_;
    std::vector<std::unique_ptr<Queue>> queues_;
    std::vector<std::thread> threads_;
    std::atomic<bool> stopping_{false};

    std::unique_ptr<std::atomic<Cell*>[]> chunks_;
    std::atomic<std::uint64_t> next_gid_{1};
    std::mutex grow_mutex_;

    std::atomic<std::uint64_t> next_task_id_{1};
    std::atomic<std::uint64_t> round_robin_{0};
    std::atomic<std::int64_t> pending_{0};
    std::atomic<std::int64_t> parked_{0};
    std::mutex idle_mutex_;
    std::condition_variable idle_cv_;

    std::atomic<std::uint64_t> spawned_{0};
    std::atomic<std::uint64_t> completed_{0};
    std::atomic<std::uint64_t> suspensions_{0};
    std::atomic<std::uint64_t> sets_{0};
    std::atomic<std::uint64_t> gets_{0};
    std::unique_ptr<std::atomic<std::uint32_t>[]> spawn_samples_;
    std::atomic<std::uint64_t> spawn_sample_count_{0};

    std::mutex failure_mutex_;
    std::exception_ptr failure_;
};

}  // namespace pxbh
