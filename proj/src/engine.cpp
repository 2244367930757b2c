#include "pxbh/engine.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace pxbh {

namespace {

thread_local const Engine* tl_engine = nullptr;
thread_local std::size_t tl_worker = 0;

class SpinLock {
public:
    void lock() noexcept {
        while (flag_.test_and_set(std::memory_order_acquire)) {
            while (flag_.test(std::memory_order_relaxed)) std::this_thread::yield();
        }
    }
    void unlock() noexcept { flag_.clear(std::memory_order_release); }

private:
    std::atomic_flag flag_ = ATOMIC_FLAG_INIT;
};

double percentile(std::vector<std::uint32_t>& samples, double q) {
    if (samples.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(q * static_cast<double>(samples.size() - 1));
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(k), samples.end());
    return static_cast<double>(samples[k]);
}

}  // namespace

struct Engine::Cell {
    std::atomic<bool> ready{false};
    SpinLock lock;
    Payload payload;
    std::vector<Waiter> waiters;
};

std::string EngineStats::to_text() const {
    std::ostringstream out;
    out << "tasks_spawned=" << tasks_spawned << '\n'
        << "tasks_completed=" << tasks_completed << '\n'
        << "suspensions=" << suspensions << '\n'
        << "sets=" << sets << '\n'
        << "gets=" << gets << '\n'
        << "spawn_overhead_median_ns=" << spawn_overhead_median_ns << '\n'
        << "spawn_overhead_p95_ns=" << spawn_overhead_p95_ns << '\n';
    return out.str();
}

Engine::Engine(EngineConfig config) : config_(config) {
    if (config_.workers == 0) throw ConfigError("engine needs at least one worker");
    chunks_ = std::make_unique<std::atomic<Cell*>[]>(kMaxChunks);
    spawn_samples_ = std::make_unique<std::atomic<std::uint32_t>[]>(kSpawnSamples);
    queues_.reserve(config_.workers);
    for (std::size_t i = 0; i < config_.workers; ++i) queues_.push_back(std::make_unique<Queue>());
    threads_.reserve(config_.workers);
    for (std::size_t i = 0; i < config_.workers; ++i) threads_.emplace_back([this, i] { worker_loop(i); });
}

Engine::~Engine() {
    shutdown();
    for (std::size_t c = 0; c < kMaxChunks; ++c) delete[] chunks_[c].load(std::memory_order_relaxed);
}

void Engine::shutdown() {
    if (stopping_.exchange(true)) return;
    for (auto& q : queues_) {
        std::lock_guard lk(q->mutex);
        q->cv.notify_all();
    }
    for (auto& t : threads_) t.join();
    threads_.clear();
}

std::optional<std::size_t> Engine::current_worker() const noexcept {
    if (tl_engine == this) return tl_worker;
    return std::nullopt;
}

std::size_t Engine::next_round_robin() noexcept {
    return static_cast<std::size_t>(round_robin_.fetch_add(1, std::memory_order_relaxed) % config_.workers);
}

// Continuations that are ready at registration time stay with the calling worker.
std::size_t Engine::ready_queue() noexcept {
    if (auto w = current_worker()) return *w;
    return next_round_robin();
}

std::uint64_t Engine::spawn(Action action, std::optional<std::size_t> queue_hint) {
    Task task;
    task.action = std::move(action);
    return spawn(std::move(task), queue_hint);
}

std::uint64_t Engine::spawn(Task task, std::optional<std::size_t> queue_hint) {
    const auto start = std::chrono::steady_clock::now();
    if (stopping_.load(std::memory_order_acquire)) throw Error("spawn on an engine that is shut down");
    std::optional<std::size_t> target = queue_hint ? queue_hint : task.home_queue;
    if (target && *target >= config_.workers) {
        throw std::out_of_range("queue hint " + std::to_string(*target) + " out of range for " +
                                std::to_string(config_.workers) + " workers");
    }
    const std::size_t queue = target ? *target : next_round_robin();
    const auto id = enqueue(Record{0, std::move(task.action), std::move(task.continuation)}, queue);
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start).count();
    const auto slot = spawn_sample_count_.fetch_add(1, std::memory_order_relaxed) & (kSpawnSamples - 1);
    spawn_samples_[slot].store(static_cast<std::uint32_t>(std::min<long long>(ns, UINT32_MAX)), std::memory_order_relaxed);
    return id;
}

std::uint64_t Engine::enqueue(Record record, std::size_t queue) {
    record.id = next_task_id_.fetch_add(1, std::memory_order_relaxed);
    const auto id = record.id;
    pending_.fetch_add(1, std::memory_order_acq_rel);
    spawned_.fetch_add(1, std::memory_order_relaxed);
    auto& q = *queues_[queue];
    {
        std::lock_guard lk(q.mutex);
        q.tasks.push_back(std::move(record));
    }
    q.cv.notify_one();
    return id;
}

bool Engine::try_pop(std::size_t index, Record& out) {
    auto& q = *queues_[index];
    std::lock_guard lk(q.mutex);
    if (q.tasks.empty()) return false;
    out = std::move(q.tasks.front());
    q.tasks.pop_front();
    return true;
}

bool Engine::try_steal(std::size_t thief, Record& out) {
    for (std::size_t k = 1; k < config_.workers; ++k) {
        auto& q = *queues_[(thief + k) % config_.workers];
        std::unique_lock lk(q.mutex, std::try_to_lock);
        if (!lk.owns_lock() || q.tasks.empty()) continue;
        out = std::move(q.tasks.back());
        q.tasks.pop_back();
        return true;
    }
    return false;
}

void Engine::run(Record& record) {
    try {
        if (record.action) record.action();
        if (record.continuation) record.continuation();
    } catch (...) {
        std::lock_guard lk(failure_mutex_);
        if (!failure_) failure_ = std::current_exception();
    }
    record = Record{};
    completed_.fetch_add(1, std::memory_order_relaxed);
    if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard lk(idle_mutex_);
        idle_cv_.notify_all();
    }
}

void Engine::worker_loop(std::size_t index) {
    tl_engine = this;
    tl_worker = index;
    auto& q = *queues_[index];
    Record record;
    for (;;) {
        if (try_pop(index, record) || (config_.stealing && try_steal(index, record))) {
            run(record);
            continue;
        }
        std::unique_lock lk(q.mutex);
        if (!q.tasks.empty()) continue;
        if (stopping_.load(std::memory_order_acquire)) break;
        if (config_.stealing) {
            q.cv.wait_for(lk, std::chrono::microseconds(200));
        } else {
            q.cv.wait(lk, [&] { return !q.tasks.empty() || stopping_.load(std::memory_order_acquire); });
        }
    }
    tl_engine = nullptr;
}

Gid Engine::future_new() {
    const auto value = next_gid_.fetch_add(1, std::memory_order_acq_rel);
    const auto index = value - 1;
    const auto chunk = static_cast<std::size_t>(index >> kChunkBits);
    if (chunk >= kMaxChunks) throw Error("gid registry exhausted");
    if (chunks_[chunk].load(std::memory_order_acquire) == nullptr) {
        std::lock_guard lk(grow_mutex_);
        if (chunks_[chunk].load(std::memory_order_relaxed) == nullptr) {
            chunks_[chunk].store(new Cell[kChunkSize], std::memory_order_release);
        }
    }
    return Gid{value};
}

Engine::Cell& Engine::resolve(Gid gid) const {
    if (gid.value == 0 || gid.value >= next_gid_.load(std::memory_order_acquire)) {
        throw ResolutionError("unknown gid " + std::to_string(gid.value));
    }
    const auto index = gid.value - 1;
    Cell* chunk = chunks_[static_cast<std::size_t>(index >> kChunkBits)].load(std::memory_order_acquire);
    if (chunk == nullptr) throw ResolutionError("unknown gid " + std::to_string(gid.value));
    return chunk[index & (kChunkSize - 1)];
}

CellState Engine::state(Gid gid) const {
    return resolve(gid).ready.load(std::memory_order_acquire) ? CellState::Set : CellState::Empty;
}

const Payload* Engine::peek(Gid gid) const {
    const Cell& cell = resolve(gid);
    return cell.ready.load(std::memory_order_acquire) ? &cell.payload : nullptr;
}

void Engine::future_set(Gid gid, Payload payload) {
    Cell& cell = resolve(gid);
    std::vector<Waiter> waiters;
    {
        std::lock_guard lk(cell.lock);
        if (cell.ready.load(std::memory_order_relaxed)) {
            throw SingleAssignmentError("second set on gid " + std::to_string(gid.value));
        }
        cell.payload = std::move(payload);
        cell.ready.store(true, std::memory_order_release);
        waiters.swap(cell.waiters);
    }
    sets_.fetch_add(1, std::memory_order_relaxed);
    if (waiters.empty()) return;
    parked_.fetch_sub(static_cast<std::int64_t>(waiters.size()), std::memory_order_acq_rel);
    const Payload* value = &cell.payload;
    for (auto& w : waiters) {
        if (w.inline_trigger) {
            w.fn(*value);
        } else {
            enqueue(Record{0, [fn = std::move(w.fn), value] { fn(*value); }, {}}, next_round_robin());
        }
    }
}

void Engine::future_get(Gid gid, PayloadAction continuation) {
    Cell& cell = resolve(gid);
    gets_.fetch_add(1, std::memory_order_relaxed);
    const Payload* value = &cell.payload;
    if (!cell.ready.load(std::memory_order_acquire)) {
        std::unique_lock lk(cell.lock);
        if (!cell.ready.load(std::memory_order_relaxed)) {
            cell.waiters.push_back(Waiter{std::move(continuation), false});
            parked_.fetch_add(1, std::memory_order_acq_rel);
            suspensions_.fetch_add(1, std::memory_order_relaxed);
            return;
        }
    }
    enqueue(Record{0, [fn = std::move(continuation), value] { fn(*value); }, {}}, ready_queue());
}

namespace {

struct JoinState {
    JoinState(std::size_t n, JoinAction a) : remaining(n + 1), slots(n, nullptr), action(std::move(a)) {}
    std::atomic<std::size_t> remaining;
    std::vector<const Payload*> slots;
    JoinAction action;
};

}  // namespace

void Engine::when_all(std::span<const Gid> gids, JoinAction action) {
    std::vector<Cell*> cells;
    cells.reserve(gids.size());
    for (const auto gid : gids) cells.push_back(&resolve(gid));

    auto join = std::make_shared<JoinState>(gids.size(), std::move(action));
    auto fire = [join] { join->action(std::span<const Payload* const>(join->slots)); };

    for (std::size_t i = 0; i < cells.size(); ++i) {
        Cell& cell = *cells[i];
        if (!cell.ready.load(std::memory_order_acquire)) {
            std::unique_lock lk(cell.lock);
            if (!cell.ready.load(std::memory_order_relaxed)) {
                cell.waiters.push_back(Waiter{[this, join, i, fire](const Payload& p) {
                                                  join->slots[i] = &p;
                                                  if (join->remaining.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                                                      enqueue(Record{0, fire, {}}, next_round_robin());
                                                  }
                                              },
                                              true});
                parked_.fetch_add(1, std::memory_order_acq_rel);
                continue;
            }
        }
        join->slots[i] = &cell.payload;
        join->remaining.fetch_sub(1, std::memory_order_acq_rel);
    }
    if (join->remaining.fetch_sub(1, std::memory_order_acq_rel) == 1) enqueue(Record{0, fire, {}}, ready_queue());
}

std::vector<std::uint64_t> Engine::unsatisfied_gids() const {
    std::vector<std::uint64_t> out;
    const auto end = next_gid_.load(std::memory_order_acquire);
    for (std::uint64_t g = 1; g < end; ++g) {
        Cell& cell = resolve(Gid{g});
        std::lock_guard lk(cell.lock);
        if (!cell.ready.load(std::memory_order_relaxed) && !cell.waiters.empty()) out.push_back(g);
    }
    return out;
}

EngineStats Engine::quiesce() {
    if (current_worker()) throw Error("quiesce called from inside a task");
    {
        std::unique_lock lk(idle_mutex_);
        idle_cv_.wait(lk, [&] { return pending_.load(std::memory_order_acquire) == 0; });
    }
    {
        std::lock_guard lk(failure_mutex_);
        if (failure_) {
            auto failure = std::exchange(failure_, nullptr);
            std::rethrow_exception(failure);
        }
    }
    if (parked_.load(std::memory_order_acquire) > 0) throw DeadlockError("quiesce", unsatisfied_gids());
    return stats();
}

EngineStats Engine::stats() const {
    EngineStats s;
    s.tasks_spawned = spawned_.load(std::memory_order_acquire);
    s.tasks_completed = completed_.load(std::memory_order_acquire);
    s.suspensions = suspensions_.load(std::memory_order_acquire);
    s.sets = sets_.load(std::memory_order_acquire);
    s.gets = gets_.load(std::memory_order_acquire);
    const auto n = std::min<std::uint64_t>(spawn_sample_count_.load(std::memory_order_acquire), kSpawnSamples);
    std::vector<std::uint32_t> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < n; ++i) samples.push_back(spawn_samples_[i].load(std::memory_order_relaxed));
    s.spawn_overhead_median_ns = percentile(samples, 0.5);
    s.spawn_overhead_p95_ns = percentile(samples, 0.95);
    return s;
}

}  // namespace pxbh
