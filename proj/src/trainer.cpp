#include <algorithm>
#include <iostream>
#include <set>
#include <stdexcept>

#include "mkd/harness.hpp"

#ifndef MKD_REVISION
#define MKD_REVISION "unknown"
#endif

namespace mkd {

std::string to_string(StepPhase p) {
    switch (p) {
        case StepPhase::retrieve: return "retrieve";
        case StepPhase::baseline_loss: return "baseline_loss";
        case StepPhase::mkd_loss: return "mkd_loss";
        case StepPhase::backward: return "backward";
        case StepPhase::optimizer_step: return "optimizer_step";
        case StepPhase::ema_update: return "ema_update";
        case StepPhase::buffer_write: return "buffer_write";
    }
    return "?";
}

namespace {

ArchSpec arch_for(const RunConfig& cfg, const Dataset& d) {
    ArchSpec a;
    a.backbone = cfg.backbone;
    a.channels = d.shape.channels;
    a.height = d.shape.height;
    a.width = d.shape.width;
    a.n_classes = d.n_classes;
    a.conv_channels = cfg.conv_channels;
    a.hidden = cfg.hidden;
    a.feature_dim = cfg.feature_dim;
    return a;
}

std::vector<int> concat_labels(std::span<const int> a, std::span<const int> b) {
    std::vector<int> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, const Dataset& data, const TaskSchedule& schedule)
    : cfg_(cfg),
      data_(&data),
      schedule_(&schedule),
      distill_(cfg.distill()),
      aug_(AugPolicy::for_strategy(cfg.aug_strategy)),
      student_(arch_for(cfg, data)),
      buffer_(cfg.memory_size, {data.shape.channels, data.shape.height, data.shape.width}, data.n_classes),
      reservoir_rng_(make_rng(cfg.seed, RngStream::reservoir)),
      retrieval_rng_(make_rng(cfg.seed, RngStream::retrieval)),
      aug_rng_(make_rng(cfg.seed, RngStream::augmentation)),
      mkd_aug_rng_(make_rng(cfg.seed, RngStream::mkd_augmentation)),
      teacher_rng_(make_rng(cfg.seed, RngStream::teacher_training)) {
    student_.initialize(cfg.seed);
    init_params_ = student_.state();
    if (cfg.mkd != MkdMode::off) teacher_.emplace(student_, cfg.alpha);
    optimizer_ = make_optimizer(cfg.optimizer_config(), student_.param_count());
    grad_.assign(student_.param_count(), 0.0);
}

LossBreakdown Trainer::train_step(const StreamBatch& batch) {
    const std::size_t cap = cfg_.mem_retrieval_cap;
    auto view = [&](const Tensor& x) { return cfg_.baseline_aug ? augment(x, aug_, aug_rng_) : x; };

    notify(StepPhase::retrieve);
    MemoryBatch mem = buffer_.random_retrieve(cap, retrieval_rng_);
    MemoryBatch mem_b;
    if (cfg_.method == Method::derpp) mem_b = buffer_.random_retrieve(cap, retrieval_rng_);

    notify(StepPhase::baseline_loss);
    GradTape tape;
    LossBreakdown base;
    Tensor stream_logits;  // DER++ stores these with the inserted rows
    Tensor mkd_x;
    std::vector<int> mkd_y;
    switch (cfg_.method) {
        case Method::er: {
            mkd_x = concat_rows(batch.images, mem.images);
            mkd_y = concat_labels(batch.labels, mem.labels);
            const Tensor v = view(mkd_x);
            base = cfg_.snapshot_kd != SnapshotKd::off
                       ? snapshot_kd_loss(v, mkd_y, student_, snapshot_teacher(), cfg_.snapshot_lambda, cfg_.tau, &tape)
                       : er_objective(student_, v, mkd_y, &tape);
            break;
        }
        case Method::derpp: {
            DerppBatch d;
            d.stream_x = view(batch.images);
            d.stream_y = batch.labels;
            d.mem_a_x = view(mem.images);
            d.mem_a_logits = mem.size() ? mem.logits : Tensor({0, data_->n_classes});
            d.mem_b_x = view(mem_b.images);
            d.mem_b_y = mem_b.labels;
            stream_logits = student_.forward(d.stream_x);
            base = derpp_loss(d, cfg_.derpp_alpha, cfg_.derpp_beta, student_, &tape);
            mkd_x = concat_rows(batch.images, mem.images);
            mkd_y = concat_labels(batch.labels, mem.labels);
            break;
        }
        case Method::erace: {
            std::set<int> present(batch.labels.begin(), batch.labels.end());
            const std::vector<int> current(present.begin(), present.end());
            base = erace_loss(view(batch.images), batch.labels, view(mem.images), mem.labels, current, student_, &tape);
            mkd_x = concat_rows(batch.images, mem.images);
            mkd_y = concat_labels(batch.labels, mem.labels);
            break;
        }
    }

    LossBreakdown loss = base;
    if (teacher_) {
        notify(StepPhase::mkd_loss);
        const Tensor x_aug = augment(mkd_x, aug_, mkd_aug_rng_);
        const LossBreakdown m =
            cfg_.mkd == MkdMode::on
                ? mkd_loss(mkd_x, x_aug, mkd_y, student_, teacher_->model(), distill_, &tape)
                : mkd_loss_single_view(x_aug, mkd_y, student_, teacher_->model(), distill_, &tape);
        loss = compose(base, m);
    }

    notify(StepPhase::backward);
    std::fill(grad_.begin(), grad_.end(), 0.0);
    tape.backward(student_, grad_);

    notify(StepPhase::optimizer_step);
    optimizer_->step(student_.params(), grad_);

    if (teacher_) {
        notify(StepPhase::ema_update);
        teacher_->ema_update(student_.params());
    }

    notify(StepPhase::buffer_write);
    buffer_.reservoir_update(batch.images, batch.labels, reservoir_rng_,
                             cfg_.method == Method::derpp ? &stream_logits : nullptr);
    since_boundary_.insert(since_boundary_.end(), batch.sample_ids.begin(), batch.sample_ids.end());
    return loss;
}

void Trainer::on_task_boundary() {
    if (cfg_.snapshot_kd == SnapshotKd::low_quality) snapshot_ = student_;
    if (cfg_.snapshot_kd == SnapshotKd::high_quality && !since_boundary_.empty())
        snapshot_ = train_high_quality_teacher();
    since_boundary_.clear();
}

Classifier Trainer::train_high_quality_teacher() {
    // Offline reference: several epochs over the previous task's samples, from the run's initialization.
    Classifier model(student_.network(), init_params_);
    auto opt = make_optimizer(cfg_.optimizer_config(), model.param_count());
    std::vector<Scalar> grad(model.param_count());
    std::vector<std::size_t> rows = since_boundary_;
    for (std::size_t epoch = 0; epoch < cfg_.snapshot_epochs; ++epoch) {
        shuffle(rows.begin(), rows.end(), teacher_rng_);
        for (std::size_t b = 0; b < rows.size(); b += cfg_.stream_batch) {
            const auto e = std::min(rows.size(), b + cfg_.stream_batch);
            const std::span<const std::size_t> idx(rows.data() + b, e - b);
            Tensor x = data_->train_images.gather_rows(idx);
            if (cfg_.baseline_aug) x = augment(x, aug_, teacher_rng_);
            std::vector<int> y;
            for (auto r : idx) y.push_back(data_->train_labels[r]);
            GradTape tape;
            er_objective(model, x, y, &tape);
            std::fill(grad.begin(), grad.end(), 0.0);
            tape.backward(model, grad);
            opt->step(model.params(), grad);
        }
    }
    return model;
}

std::vector<InferenceMode> Trainer::available_modes() const {
    if (!teacher_) return {InferenceMode::student};
    return {InferenceMode::student, InferenceMode::teacher, InferenceMode::averaged};
}

InferenceMode Trainer::effective_mode() const { return teacher_ ? cfg_.inference_mode : InferenceMode::student; }

Classifier Trainer::model_for(InferenceMode mode) const { return inference_model(student_, teacher(), mode); }

std::optional<double> RunRecord::reported_bt() const {
    const auto it = bt.find(reported_mode);
    if (it == bt.end()) return std::nullopt;
    return it->second;
}

Dataset load_run_dataset(const RunConfig& cfg) {
    SyntheticOptions so;
    so.train_per_class = cfg.synth_train_per_class;
    so.test_per_class = cfg.synth_test_per_class;
    so.image_size = cfg.synth_image_size;
    so.difficulty = cfg.synth_difficulty;
    so.seed = cfg.dataset_seed;
    return load_dataset(cfg.dataset, so, cfg.data_root);
}

RunRecord run_experiment(const RunConfig& cfg, const Dataset* data, const RunHooks& hooks) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<Dataset> owned;
    if (!data) data = &owned.emplace(load_run_dataset(cfg));
    if (data->id != cfg.dataset)
        throw std::invalid_argument("dataset '" + data->id + "' does not match config dataset '" + cfg.dataset + "'");

    const TaskSchedule schedule =
        build_schedule(cfg.dataset, data->n_classes, cfg.n_tasks, cfg.boundary_mode, cfg.blur_scale, cfg.seed);
    const Stream stream = make_stream(*data, schedule, cfg.stream_batch, cfg.seed);
    const auto& plan = stream.plan();
    const std::size_t K = schedule.n_tasks();

    Trainer tr(cfg, *data, schedule);
    if (hooks.on_phase) tr.set_observer(hooks.on_phase);
    BoundaryDetector detector(cfg.boundary_min_gap);
    Rng drift_rng = make_rng(cfg.seed, RngStream::drift_subset);

    RunRecord rec;
    rec.config = cfg;
    rec.run_name = cfg.run_name.empty() ? cfg.default_run_name() : cfg.run_name;
    rec.revision = MKD_REVISION;
    rec.schedule_manifest = schedule.manifest();
    rec.reported_mode = tr.effective_mode();
    const auto modes = tr.available_modes();
    for (auto m : modes) rec.accuracy.emplace(m, AccuracyMatrix(K));
    auto log = [&](std::size_t step, const std::string& name, double v) { rec.log.push_back({step, name, v}); };

    std::vector<std::vector<std::size_t>> task_rows(K);
    for (std::size_t k = 0; k < K; ++k) task_rows[k] = task_test_rows(*data, schedule, k);

    std::size_t drift_task = 0;
    Tensor drift_x, drift_prev;
    std::optional<std::size_t> prev_hint;

    for (std::size_t b = 0; b < stream.size(); ++b) {
        const StreamBatch batch = stream.batch(b);
        const bool fired = detector.observe(batch.labels);
        if (fired) {
            rec.detected_boundaries.push_back(b);
            log(b, "boundary_detected", 1.0);
        }
        const bool boundary = batch.task_hint ? (b > 0 && batch.task_hint != prev_hint) : (fired && b > 0);
        prev_hint = batch.task_hint;
        if (boundary) {
            log(b, "task_boundary", 1.0);
            tr.on_task_boundary();
        }

        const LossBreakdown loss = tr.train_step(batch);
        log(b, "loss_total", loss.total);
        log(b, "loss_ce", loss.ce);
        log(b, "loss_distill", loss.distill);
        log(b, "loss_extra", loss.baseline_extra);

        const auto task_now = static_cast<std::size_t>(
            std::lower_bound(plan.task_end_batch.begin(), plan.task_end_batch.end(), b) - plan.task_end_batch.begin());

        if (cfg.drift_every > 0 && task_now >= 1 && task_now < K) {
            if (task_now != drift_task) {
                // Fixed subset of old-class memory items for this task.
                drift_task = task_now;
                drift_x = Tensor();
                const auto mem = tr.buffer().all();
                std::vector<std::size_t> old;
                for (std::size_t i = 0; i < mem.size(); ++i)
                    if (static_cast<std::size_t>(schedule.task_of(mem.labels[i])) < task_now) old.push_back(i);
                shuffle(old.begin(), old.end(), drift_rng);
                old.resize(std::min(old.size(), cfg.drift_subset));
                std::sort(old.begin(), old.end());
                if (!old.empty()) {
                    drift_x = mem.images.gather_rows(old);
                    drift_prev = batched_features(tr.student(), drift_x);
                }
            } else if (!drift_x.empty() && (b + 1) % cfg.drift_every == 0) {
                Tensor now = batched_features(tr.student(), drift_x);
                const double d = stacked_feature_distance(drift_prev, now);
                rec.drift.push(b, d);
                log(b, "drift", d);
                drift_prev = std::move(now);
            }
        }

        if (cfg.eval_every > 0 && (b + 1) % cfg.eval_every == 0) {
            const auto m = tr.model_for(rec.reported_mode);
            log(b, "acc_all", accuracy_from_logits(batched_forward(m, data->test_images), data->test_labels));
        }

        for (std::size_t k = 0; k < K; ++k) {
            if (plan.task_end_batch[k] != b) continue;
            rec.task_end_steps.push_back(b);
            for (auto mode : modes) {
                const auto model = tr.model_for(mode);
                const Tensor logits = batched_forward(model, data->test_images);
                for (std::size_t i = 0; i < K; ++i) {
                    const auto& rows = task_rows[i];
                    if (rows.empty()) continue;
                    std::vector<int> y;
                    for (auto r : rows) y.push_back(data->test_labels[r]);
                    const double acc = accuracy_from_logits(logits.gather_rows(rows), y);
                    rec.accuracy.at(mode).set(k, i, acc);
                    log(b, "acc_" + to_string(mode) + "_task" + std::to_string(i), acc);
                }
            }
        }
    }
    rec.n_steps = stream.size();

    for (auto mode : modes) {
        rec.faa[mode] = final_avg_accuracy(rec.accuracy.at(mode));
        log(rec.n_steps, "faa_" + to_string(mode), rec.faa[mode]);
        if (K >= 2) {
            rec.bt[mode] = backward_transfer(rec.accuracy.at(mode));
            log(rec.n_steps, "bt_" + to_string(mode), rec.bt[mode]);
        }
    }

    const Classifier final_model = tr.model_for(rec.reported_mode);
    const Tensor logits = batched_forward(final_model, data->test_images);
    rec.final_logits_accuracy = accuracy_from_logits(logits, data->test_labels);
    log(rec.n_steps, "logits_acc", rec.final_logits_accuracy);
    rec.confusion = confusion_matrix(predict_labels(logits), data->test_labels, data->n_classes);
    try {
        rec.final_ncm_accuracy = ncm_eval(final_model, tr.buffer(), data->test_images, data->test_labels);
        log(rec.n_steps, "ncm_acc", *rec.final_ncm_accuracy);
    } catch (const std::invalid_argument& e) {
        std::cerr << "warning: NCM evaluation skipped: " << e.what() << '\n';
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (cfg.output_dir) {
        const auto dir = *cfg.output_dir / rec.run_name;
        save_record(rec, dir);
        const auto pairs = rec.config.to_pairs();
        const std::map<std::string, std::string> hyper(pairs.begin(), pairs.end());
        tr.student().save(dir / "student.ckpt", hyper);
        if (tr.teacher()) tr.teacher()->model().save(dir / "teacher.ckpt", hyper);
        emit_plots(rec, dir);
    }
    return rec;
}

}  // namespace mkd
