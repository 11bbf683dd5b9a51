#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "rppg/cnn/model.hpp"
#include "rppg/errors.hpp"
#include "rppg/rng.hpp"

namespace rppg::cnn {

struct TrainConfig {
    int batch_size = 20;
    int max_iterations = 15000;
    double base_lr = 0.01;
    double lr_gamma = 0.1;   // multiply the rate by this ...
    int lr_step = 5000;      // ... every lr_step iterations
    double momentum = 0.9;
    std::uint64_t seed = 1;
    double dropout_keep = 0.4;
    double val_fraction = 0.1;
    int val_interval = 100;
    bool verbose = false;
};

// Training samples: one (h*w) x 3 matrix per feature image plus its bpm label.
template <typename Scalar>
struct Dataset {
    std::vector<Mat<Scalar>> images;
    std::vector<double> labels_bpm;
    Shape shape{25, 25, 3};

    std::size_t size() const { return images.size(); }
};

struct TrainLogRow {
    int iteration = 0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_val_iteration = -1;
    double final_train_loss = 0.0;
};

// Euclidean loss: (1/2N) * sum (q - p)^2.
template <typename Scalar>
double euclidean_loss(const Eigen::Ref<const Mat<Scalar>>& pred,
                      const Eigen::Ref<const Mat<Scalar>>& target) {
    if (pred.rows() == 0) throw numeric_error("cnn: loss over an empty batch");
    if (pred.rows() != target.rows()) throw numeric_error("cnn: prediction/label batch mismatch");
    const double n = static_cast<double>(pred.rows());
    return (target - pred).template cast<double>().squaredNorm() / (2.0 * n);
}

namespace detail_train {

template <typename Scalar>
Batch<Scalar> gather(const Dataset<Scalar>& ds, const std::vector<std::size_t>& idx,
                     std::size_t begin, std::size_t count) {
    Batch<Scalar> b(static_cast<int>(count), ds.shape);
    for (std::size_t i = 0; i < count; ++i)
        b.data.middleRows(static_cast<Eigen::Index>(i) * ds.shape.rows(), ds.shape.rows()) =
            ds.images[idx[begin + i]];
    return b;
}

template <typename Scalar>
Mat<Scalar> gather_labels(const Dataset<Scalar>& ds, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t count) {
    Mat<Scalar> t(count, 1);
    for (std::size_t i = 0; i < count; ++i)
        t(static_cast<Eigen::Index>(i), 0) =
            static_cast<Scalar>(normalize_label(ds.labels_bpm[idx[begin + i]]));
    return t;
}

// Mean loss over a sample set in infer mode, evaluated in batch-size chunks.
template <typename Scalar>
double eval_loss(const Model<Scalar>& model, const Dataset<Scalar>& ds,
                 const std::vector<std::size_t>& idx, int batch_size) {
    Rng rng(0);
    double total = 0.0;
    std::size_t done = 0;
    while (done < idx.size()) {
        const std::size_t count = std::min<std::size_t>(batch_size, idx.size() - done);
        const Batch<Scalar> x = gather(ds, idx, done, count);
        const Mat<Scalar> t = gather_labels(ds, idx, done, count);
        const Batch<Scalar> y = model.forward_batch(x, Mode::Infer, rng);
        total += euclidean_loss<Scalar>(y.data, t) * static_cast<double>(count);
        done += count;
    }
    return total / static_cast<double>(idx.size());
}

}  // namespace detail_train

// Fit per-channel input statistics on the given samples and store them in
// the model.
template <typename Scalar>
void fit_input_normalization(Model<Scalar>& model, const Dataset<Scalar>& ds,
                             const std::vector<std::size_t>& idx) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero(), var = Eigen::Vector3d::Zero();
    double count = 0.0;
    for (std::size_t i : idx) {
        for (int c = 0; c < 3; ++c) mean(c) += ds.images[i].col(c).template cast<double>().sum();
        count += static_cast<double>(ds.images[i].rows());
    }
    mean /= count;
    for (std::size_t i : idx)
        for (int c = 0; c < 3; ++c)
            var(c) += (ds.images[i].col(c).template cast<double>().array() - mean(c)).square().sum();
    var /= count;
    model.input_mean = mean;
    for (int c = 0; c < 3; ++c) model.input_std(c) = std::max(std::sqrt(var(c)), 1e-12);
}

// Mini-batch SGD with momentum and step learning-rate decay. The model is
// left holding the best-validation snapshot (or the final parameters when no
// validation split is configured).
template <typename Scalar>
TrainResult train(Model<Scalar>& model, const Dataset<Scalar>& ds, const TrainConfig& cfg) {
    if (ds.size() == 0) throw numeric_error("cnn: cannot train on an empty dataset");
    if (cfg.batch_size < 1) throw numeric_error("cnn: batch size must be >= 1");

    for (auto& l : model.layers)
        if (l->kind() == LayerKind::Dropout)
            static_cast<DropoutLayer<Scalar>*>(l.get())->set_keep(cfg.dropout_keep);

    // Seeded validation split.
    Rng split_rng = Rng::derive(cfg.seed, 0xA11C);
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    split_rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(ds.size()));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
    if (train_idx.empty()) throw numeric_error("cnn: validation split leaves no training data");

    fit_input_normalization(model, ds, train_idx);

    // Momentum buffers aligned with each layer's parameter list.
    std::vector<std::vector<Mat<Scalar>>> velocity(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        for (auto* p : model.layers[i]->params())
            velocity[i].push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));

    TrainResult result;
    std::vector<std::vector<Mat<Scalar>>> best_snapshot;
    Rng epoch_rng = Rng::derive(cfg.seed, 0xE90C);
    std::vector<std::size_t> epoch = train_idx;
    std::size_t cursor = epoch.size();  // forces an initial shuffle

    std::vector<Cache<Scalar>> caches;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const std::size_t count = std::min<std::size_t>(cfg.batch_size, epoch.size());
        if (cursor + count > epoch.size()) {
            epoch_rng.shuffle(epoch);
            cursor = 0;
        }
        const Batch<Scalar> x = detail_train::gather(ds, epoch, cursor, count);
        const Mat<Scalar> t = detail_train::gather_labels(ds, epoch, cursor, count);
        cursor += count;

        Rng iter_rng = Rng::derive(cfg.seed, 0xD0D0 + static_cast<std::uint64_t>(iter));
        const Batch<Scalar> y = model.forward_batch(x, Mode::Train, iter_rng, &caches);
        const double loss = euclidean_loss<Scalar>(y.data, t);
        if (!std::isfinite(loss))
            throw numeric_error("cnn: non-finite training loss at iteration " + std::to_string(iter));

        Batch<Scalar> dy;
        dy.n = y.n;
        dy.shape = y.shape;
        dy.data = (y.data - t) / static_cast<Scalar>(count);

        const auto grads = model.backward_batch(dy, caches);
        model.post_batch_update(caches);

        const double lr =
            cfg.base_lr * std::pow(cfg.lr_gamma, static_cast<double>((iter - 1) / cfg.lr_step));
        for (std::size_t li = 0; li < model.layers.size(); ++li) {
            auto params = model.layers[li]->params();
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                velocity[li][pi] = static_cast<Scalar>(cfg.momentum) * velocity[li][pi] -
                                   static_cast<Scalar>(lr) * grads[li][pi];
                *params[pi] += velocity[li][pi];
            }
        }

        TrainLogRow row{iter, loss, std::nullopt};
        if (!val_idx.empty() && (iter % cfg.val_interval == 0 || iter == cfg.max_iterations)) {
            const double val = detail_train::eval_loss(model, ds, val_idx, cfg.batch_size);
            row.val_loss = val;
            if (val < result.best_val_loss) {
                result.best_val_loss = val;
                result.best_val_iteration = iter;
                best_snapshot = model.snapshot_blobs();
            }
            if (cfg.verbose)
                std::cerr << "iter " << iter << " train " << loss << " val " << val << '\n';
        }
        result.log.push_back(row);
        result.final_train_loss = loss;
    }

    if (!best_snapshot.empty()) model.restore_blobs(best_snapshot);
    return result;
}

}  // namespace rppg::cnn
