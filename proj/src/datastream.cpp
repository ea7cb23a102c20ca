#include "mkd/datastream.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mkd/rng.hpp"

namespace mkd {

std::string to_string(BoundaryMode m) { return m == BoundaryMode::clear ? "clear" : "blurry"; }

BoundaryMode parse_boundary_mode(const std::string& s) {
    if (s == "clear") return BoundaryMode::clear;
    if (s == "blurry") return BoundaryMode::blurry;
    throw std::invalid_argument("unknown boundary_mode '" + s + "' (expected clear or blurry)");
}

int TaskSchedule::task_of(int c) const {
    for (std::size_t k = 0; k < tasks.size(); ++k)
        if (std::binary_search(tasks[k].begin(), tasks[k].end(), c)) return static_cast<int>(k);
    return -1;
}

std::string TaskSchedule::manifest() const {
    std::ostringstream os;
    os << "# dataset " << dataset_id << ", " << tasks.size() << " tasks, boundary " << to_string(boundary_mode)
       << ", blur_scale " << blur_scale << ", seed " << seed << '\n';
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        os << "task " << k << ':';
        for (int c : tasks[k]) os << ' ' << c;
        os << '\n';
    }
    return os.str();
}

void TaskSchedule::write_manifest(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << manifest();
}

TaskSchedule build_schedule(const std::string& dataset_id, std::size_t n_tasks, BoundaryMode mode,
                            std::size_t blur_scale, std::uint64_t seed) {
    return build_schedule(dataset_id, dataset_info(dataset_id).n_classes, n_tasks, mode, blur_scale, seed);
}

TaskSchedule build_schedule(const std::string& dataset_id, std::size_t n_classes, std::size_t n_tasks,
                            BoundaryMode mode, std::size_t blur_scale, std::uint64_t seed) {
    if (n_tasks == 0) throw std::invalid_argument("n_tasks must be positive");
    if (n_classes % n_tasks != 0)
        throw std::invalid_argument(std::to_string(n_classes) + " classes cannot be split into " +
                                    std::to_string(n_tasks) + " equal tasks");
    std::vector<int> ids(n_classes);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng = make_rng(seed, RngStream::schedule);
    shuffle(ids.begin(), ids.end(), rng);

    TaskSchedule s;
    s.dataset_id = dataset_id;
    s.n_classes = n_classes;
    s.boundary_mode = mode;
    s.blur_scale = blur_scale;
    s.seed = seed;
    const std::size_t per = n_classes / n_tasks;
    for (std::size_t k = 0; k < n_tasks; ++k) {
        ClassSet set(ids.begin() + static_cast<std::ptrdiff_t>(k * per),
                     ids.begin() + static_cast<std::ptrdiff_t>((k + 1) * per));
        std::sort(set.begin(), set.end());
        s.tasks.push_back(std::move(set));
    }
    return s;
}

Stream::Stream(const Dataset& data, StreamPlan plan) : data_(&data), plan_(std::move(plan)) {}

StreamBatch Stream::batch(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("stream batch index out of range");
    const std::size_t b = plan_.batch_begin[i], e = plan_.batch_begin[i + 1];
    StreamBatch out;
    out.sample_ids.assign(plan_.order.begin() + static_cast<std::ptrdiff_t>(b),
                          plan_.order.begin() + static_cast<std::ptrdiff_t>(e));
    out.images = data_->train_images.gather_rows(out.sample_ids);
    for (auto id : out.sample_ids) out.labels.push_back(data_->train_labels[id]);
    out.step = i;
    out.task_hint = plan_.task_hint[i];
    return out;
}

namespace {

/// Training rows of each task, shuffled within the task.
std::vector<std::vector<std::size_t>> task_orders(const Dataset& data, const TaskSchedule& schedule,
                                                  std::uint64_t seed) {
    if (data.n_classes != schedule.n_classes)
        throw std::invalid_argument("schedule and dataset disagree on the class count");
    std::vector<std::vector<std::size_t>> per_task(schedule.n_tasks());
    for (std::size_t r = 0; r < data.train_size(); ++r) {
        const int t = schedule.task_of(data.train_labels[r]);
        if (t < 0) throw std::invalid_argument("training label outside the schedule's classes");
        per_task[static_cast<std::size_t>(t)].push_back(r);
    }
    Rng rng = make_rng(seed, RngStream::stream_order);
    for (auto& rows : per_task) {
        if (rows.empty()) throw std::invalid_argument("a task has no training samples");
        shuffle(rows.begin(), rows.end(), rng);
    }
    return per_task;
}

std::size_t batch_of(const StreamPlan& p, std::size_t position) {
    const auto it = std::upper_bound(p.batch_begin.begin(), p.batch_begin.end(), position);
    return static_cast<std::size_t>(it - p.batch_begin.begin()) - 1;
}

}  // namespace

Stream iter_clear(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    const auto per_task = task_orders(data, schedule, seed);
    StreamPlan p;
    for (std::size_t k = 0; k < per_task.size(); ++k) {
        const auto& rows = per_task[k];
        for (std::size_t i = 0; i < rows.size(); i += batch_size) {
            p.batch_begin.push_back(p.order.size() + i);
            p.task_hint.push_back(k);
        }
        for (auto r : rows) {
            p.order.push_back(r);
            p.origin_task.push_back(k);
            p.mix_prob.push_back(k == 0 ? 0.0 : 1.0);
        }
        p.task_end_batch.push_back(p.task_hint.size() - 1);
    }
    p.batch_begin.push_back(p.order.size());
    return Stream(data, std::move(p));
}

Stream iter_blurry(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size,
                   std::size_t blur_scale, std::uint64_t seed) {
    if (blur_scale == 0) {
        Stream s = iter_clear(data, schedule, batch_size, seed);
        StreamPlan p = s.plan();
        for (auto& h : p.task_hint) h.reset();
        return Stream(data, std::move(p));
    }
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    const auto per_task = task_orders(data, schedule, seed);
    const std::size_t K = per_task.size();
    for (std::size_t k = 0; k < K; ++k) {
        // Each task gives up to blur_scale samples in total to its two windows.
        if (K > 1 && per_task[k].size() < blur_scale)
            throw std::invalid_argument("blur_scale " + std::to_string(blur_scale) + " exceeds the " +
                                        std::to_string(per_task[k].size()) + " samples of task " + std::to_string(k));
    }
    const std::size_t head = blur_scale - blur_scale / 2;  // taken from the later task
    const std::size_t tail = blur_scale / 2;               // taken from the earlier task

    Rng rng = make_rng(seed, RngStream::stream_order);
    StreamPlan p;
    std::vector<std::size_t> nominal_end(K);
    std::size_t start = 0;  // first unused sample of the current task
    for (std::size_t k = 0; k < K; ++k) {
        const auto& rows = per_task[k];
        const std::size_t pure_end = k + 1 < K ? rows.size() - tail : rows.size();
        for (std::size_t i = start; i < pure_end; ++i) {
            p.order.push_back(rows[i]);
            p.origin_task.push_back(k);
            p.mix_prob.push_back(k == 0 ? 0.0 : 1.0);
        }
        if (k + 1 == K) break;
        nominal_end[k] = p.order.size() + tail;
        const auto& next = per_task[k + 1];
        std::size_t a = pure_end, b = 0;
        for (std::size_t j = 0; j < blur_scale; ++j) {
            const double prob = (static_cast<double>(j) + 0.5) / static_cast<double>(blur_scale);
            const bool a_left = a < rows.size(), b_left = b < head;
            bool take_next = uniform01(rng) < prob;
            if (!a_left) take_next = true;
            if (!b_left) take_next = false;
            if (take_next) {
                p.order.push_back(next[b++]);
                p.origin_task.push_back(k + 1);
            } else {
                p.order.push_back(rows[a++]);
                p.origin_task.push_back(k);
            }
            p.mix_prob.push_back(prob);
        }
        start = head;
    }
    nominal_end[K - 1] = p.order.size();

    for (std::size_t i = 0; i < p.order.size(); i += batch_size) {
        p.batch_begin.push_back(i);
        p.task_hint.emplace_back(std::nullopt);
    }
    p.batch_begin.push_back(p.order.size());
    for (std::size_t k = 0; k < K; ++k) p.task_end_batch.push_back(batch_of(p, nominal_end[k] - 1));
    return Stream(data, std::move(p));
}

Stream make_stream(const Dataset& data, const TaskSchedule& schedule, std::size_t batch_size, std::uint64_t seed) {
    if (schedule.boundary_mode == BoundaryMode::clear) return iter_clear(data, schedule, batch_size, seed);
    return iter_blurry(data, schedule, batch_size, schedule.blur_scale, seed);
}

std::vector<std::size_t> task_test_rows(const Dataset& data, const TaskSchedule& schedule, std::size_t k) {
    std::vector<std::size_t> rows;
    const auto& set = schedule.tasks.at(k);
    for (std::size_t r = 0; r < data.test_size(); ++r)
        if (std::binary_search(set.begin(), set.end(), data.test_labels[r])) rows.push_back(r);
    return rows;
}

}  // namespace mkd
