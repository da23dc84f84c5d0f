#include "koopman/trajpred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace koopman::trajpred {

void TrajPredConfig::validate() const {
    if (encoded_size < 1) {
        throw InvalidParams("TrajPredConfig: encoded_size must be >= 1");
    }
    if (batch_size < 1) {
        throw InvalidParams("TrajPredConfig: batch_size must be >= 1");
    }
    if (numepochs < 0 || learning_rate <= 0.0) {
        throw InvalidParams("TrajPredConfig: numepochs >= 0, learning_rate > 0 required");
    }
    if (alpha < 0.0 || beta < 0.0) {
        throw InvalidParams("TrajPredConfig: alpha, beta must be >= 0");
    }
}

std::vector<Tensor> rollout(const Tensor& K, const Tensor& y0, int64_t m) {
    if (m < 1) {
        throw InvalidParams("rollout: step count must be a positive integer");
    }
    if (K.rows() != K.cols() || K.rows() != y0.rows()) {
        throw ShapeMismatch("rollout: K " + K.shape_str() + " vs y0 " + y0.shape_str());
    }
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(m));
    Tensor cur = y0;
    for (int64_t s = 0; s < m; ++s) {
        cur = matmul(K, cur);
        out.push_back(cur);
    }
    return out;
}

namespace {

/// Concatenate trajectory tensors (d x (m+1) each) into d x B(m+1).
Tensor concat_trajs(const std::vector<Tensor>& trajs, const std::vector<int64_t>& ids) {
    const int64_t d = trajs[0].rows();
    const int64_t len = trajs[0].cols();
    Tensor out(d, static_cast<int64_t>(ids.size()) * len);
    for (size_t k = 0; k < ids.size(); ++k) {
        const Tensor& tr = trajs[static_cast<size_t>(ids[k])];
        for (int64_t i = 0; i < d; ++i) {
            for (int64_t j = 0; j < len; ++j) {
                out.at(i, static_cast<int64_t>(k) * len + j) = tr.at(i, j);
            }
        }
    }
    return out;
}

std::vector<int64_t> all_ids(size_t n) {
    std::vector<int64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

/// Column indexes of the initial states in a concatenated batch.
std::vector<int64_t> initial_columns(int64_t batch, int64_t len) {
    std::vector<int64_t> cols;
    cols.reserve(static_cast<size_t>(batch));
    for (int64_t k = 0; k < batch; ++k) {
        cols.push_back(k * len);
    }
    return cols;
}

/// Column indexes of steps 1..m, step-major, matching the rollout order.
std::vector<int64_t> target_columns(int64_t batch, int64_t len) {
    std::vector<int64_t> cols;
    cols.reserve(static_cast<size_t>(batch * (len - 1)));
    for (int64_t s = 1; s < len; ++s) {
        for (int64_t k = 0; k < batch; ++k) {
            cols.push_back(k * len + s);
        }
    }
    return cols;
}

Tensor gather_columns(const Tensor& x, const std::vector<int64_t>& cols) {
    Tensor out(x.rows(), static_cast<int64_t>(cols.size()));
    for (int64_t i = 0; i < x.rows(); ++i) {
        for (size_t j = 0; j < cols.size(); ++j) {
            out.at(i, static_cast<int64_t>(j)) = x.at(i, cols[j]);
        }
    }
    return out;
}

Tensor concat_steps(const std::vector<Tensor>& steps) {
    const int64_t d = steps[0].rows();
    int64_t cols = 0;
    for (const Tensor& s : steps) {
        cols += s.cols();
    }
    Tensor out(d, cols);
    int64_t off = 0;
    for (const Tensor& s : steps) {
        for (int64_t i = 0; i < d; ++i) {
            for (int64_t j = 0; j < s.cols(); ++j) {
                out.at(i, off + j) = s.at(i, j);
            }
        }
        off += s.cols();
    }
    return out;
}

double weight_decay_value(const nets::AutoencoderParams& ae) {
    double acc = 0.0;
    for (const nets::DenseLayer& l : ae.encoder.layers) {
        acc += l.W.frobenius_norm() * l.W.frobenius_norm();
    }
    for (const nets::DenseLayer& l : ae.decoder.layers) {
        acc += l.W.frobenius_norm() * l.W.frobenius_norm();
    }
    return acc;
}

} // namespace

TrajPred::TrajPred(data::TrajectoryDataset ds, TrajPredConfig cfg) {
    cfg.validate();
    ds.validate();
    m_ = ds.steps();

    nets::MlpSpec enc;
    enc.input_size = ds.dim();
    enc.hidden_layers = cfg.encoder_hidden_layers;
    enc.output_size = cfg.encoded_size;
    enc.activation = cfg.activation;
    enc.use_bias = cfg.use_bias;
    nets::MlpSpec dec = nets::mirror_spec(enc);
    if (cfg.decoder_hidden_layers) {
        dec.hidden_layers = *cfg.decoder_hidden_layers;
    }
    ae_ = nets::build_autoencoder(enc, dec, cfg.seed);

    nets::Rng krng(nets::Rng::mix(cfg.seed, 0x4B6F6F704B));
    K_ = nets::koopman_layer_init(cfg.encoded_size, krng);

    if (cfg.scale_features) {
        const Tensor all = concat_trajs(ds.train, all_ids(ds.train.size()));
        scaler_ = data::Scaler::fit(all);
    } else {
        scaler_ = data::Scaler::identity(ds.dim());
    }

    cfg_ = std::move(cfg);
    ds_ = std::move(ds);
}

TrajPred TrajPred::restore(TrajPredConfig cfg, nets::AutoencoderParams ae, Tensor K,
                           data::Scaler scaler, int64_t train_steps) {
    TrajPred tp;
    tp.cfg_ = std::move(cfg);
    tp.ae_ = std::move(ae);
    tp.K_ = std::move(K);
    tp.scaler_ = std::move(scaler);
    tp.m_ = train_steps;
    tp.trained_ = true;
    return tp;
}

metrics::RunStats TrajPred::train_net() {
    if (!ds_) {
        throw NotTrained("TrajPred: model was restored without data; cannot train");
    }
    const int64_t J = static_cast<int64_t>(ds_->train.size());
    const int64_t len = m_ + 1;
    const metrics::LossWeights w = cfg_.weights();

    std::vector<Tensor> scaled_train;
    scaled_train.reserve(static_cast<size_t>(J));
    for (const Tensor& tr : ds_->train) {
        scaled_train.push_back(scaler_.transform(tr));
    }

    std::vector<Tensor*> params = nets::collect_parameters(ae_);
    params.push_back(&K_);
    nets::Adam adam(cfg_.learning_rate);

    metrics::RunStats stats;
    stats.epochs.reserve(static_cast<size_t>(cfg_.numepochs));

    ad::Tape tape;
    for (int64_t epoch = 0; epoch < cfg_.numepochs; ++epoch) {
        try {
            // Seeded per-epoch shuffle, independent of prior epochs.
            nets::Rng shuffle_rng(nets::Rng::mix(cfg_.seed, 0xE9000 + static_cast<std::uint64_t>(epoch)));
            std::vector<int64_t> order = all_ids(static_cast<size_t>(J));
            for (int64_t i = J - 1; i > 0; --i) {
                std::swap(order[static_cast<size_t>(i)],
                          order[static_cast<size_t>(shuffle_rng.below(i + 1))]);
            }

            metrics::PooledError recon_loss_pool, recon_anae_pool;
            metrics::PooledError lin_pool;
            metrics::PooledError pred_loss_pool, pred_anae_pool;
            double total_sum = 0.0;
            int64_t batches = 0;

            for (int64_t start = 0; start < J; start += cfg_.batch_size) {
                const int64_t stop = std::min(start + cfg_.batch_size, J);
                std::vector<int64_t> ids(order.begin() + start, order.begin() + stop);
                const int64_t B = stop - start;

                const Tensor xb = concat_trajs(scaled_train, ids);
                const Tensor xb_raw = concat_trajs(ds_->train, ids);
                const std::vector<int64_t> y0_cols = initial_columns(B, len);
                const std::vector<int64_t> tgt_cols = target_columns(B, len);

                tape.clear();
                nets::MlpVars encv = nets::register_params(tape, ae_.encoder, true);
                nets::MlpVars decv = nets::register_params(tape, ae_.decoder, true);
                ad::Var Kv = tape.leaf(K_, true);
                ad::Var X = tape.leaf(xb, false);

                ad::Var Y = nets::forward(ae_.encoder, encv, X);
                ad::Var y0 = ad::select_columns(Y, y0_cols);

                std::vector<ad::Var> rolls;
                rolls.reserve(static_cast<size_t>(m_));
                ad::Var cur = y0;
                for (int64_t s = 0; s < m_; ++s) {
                    cur = ad::matmul(Kv, cur);
                    rolls.push_back(cur);
                }
                ad::Var Yroll = ad::concat_columns(rolls);
                ad::Var Ytgt = ad::select_columns(Y, tgt_cols);
                ad::Var Llin = ad::mse(Ytgt, Yroll);

                ad::Var Xhat = nets::forward(ae_.decoder, decv, Y);
                ad::Var Lrecon = ad::mse(X, Xhat);

                ad::Var Xpred = nets::forward(ae_.decoder, decv, Yroll);
                ad::Var Xtgt = ad::select_columns(X, tgt_cols);
                ad::Var Lpred = ad::mse(Xtgt, Xpred);

                ad::Var ae_decay;
                bool first = true;
                for (const auto& layer : encv.layers) {
                    ae_decay = first ? ad::sum_squares(layer.first)
                                     : ad::add(ae_decay, ad::sum_squares(layer.first));
                    first = false;
                }
                for (const auto& layer : decv.layers) {
                    ae_decay = ad::add(ae_decay, ad::sum_squares(layer.first));
                }
                ad::Var Kreg = metrics::k_regularizer(metrics::ModelKind::TrajPred, Kv);

                ad::Var L = metrics::total_loss(Lrecon, Llin, Lpred, ae_decay, Kreg, w);
                tape.backward(L);

                recon_loss_pool.add(xb, Xhat.value());
                recon_anae_pool.add(xb_raw, scaler_.inverse(Xhat.value()),
                                    cfg_.anae_zero_epsilon);
                lin_pool.add(Ytgt.value(), Yroll.value(), cfg_.anae_zero_epsilon);
                pred_loss_pool.add(Xtgt.value(), Xpred.value());
                pred_anae_pool.add(gather_columns(xb_raw, tgt_cols),
                                   scaler_.inverse(Xpred.value()), cfg_.anae_zero_epsilon);
                total_sum += L.value()[0];
                ++batches;

                std::vector<Tensor> grads;
                grads.reserve(params.size());
                for (const auto& layer : encv.layers) {
                    grads.push_back(layer.first.grad());
                    if (ae_.encoder.spec.use_bias) {
                        grads.push_back(layer.second.grad());
                    }
                }
                for (const auto& layer : decv.layers) {
                    grads.push_back(layer.first.grad());
                    if (ae_.decoder.spec.use_bias) {
                        grads.push_back(layer.second.grad());
                    }
                }
                grads.push_back(Kv.grad());
                adam.step(params, grads);
            }

            metrics::EpochMetrics em;
            em.train.recon_loss = recon_loss_pool.mse();
            em.train.lin_loss = lin_pool.mse();
            em.train.pred_loss = pred_loss_pool.mse();
            em.train.total_loss = total_sum / static_cast<double>(batches);
            em.train.recon_anae = recon_anae_pool.anae_percent();
            em.train.lin_anae = lin_pool.anae_percent();
            em.train.pred_anae = pred_anae_pool.anae_percent();
            if (!ds_->val.empty()) {
                // Validation runs after all batches of the epoch, per the
                // training schedule, with the parameters as they now stand.
                em.val = evaluate(ds_->val);
            }
            stats.epochs.push_back(em);
        } catch (const DegenerateSpectrum& e) {
            throw DegenerateSpectrum("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }

    trained_ = true;
    if (!ds_->test.empty()) {
        stats.test = test_net();
    }
    return stats;
}

metrics::SplitMetrics TrajPred::evaluate(const std::vector<Tensor>& trajs) const {
    if (trajs.empty()) {
        throw InvalidParams("evaluate: empty trajectory set");
    }
    const int64_t len = trajs[0].cols();
    const int64_t B = static_cast<int64_t>(trajs.size());
    const Tensor xb_raw = concat_trajs(trajs, all_ids(trajs.size()));
    const Tensor xb = scaler_.transform(xb_raw);
    const std::vector<int64_t> y0_cols = initial_columns(B, len);
    const std::vector<int64_t> tgt_cols = target_columns(B, len);

    const Tensor y = nets::forward_plain(ae_.encoder, xb);
    const Tensor y0 = gather_columns(y, y0_cols);
    const Tensor yroll = concat_steps(rollout(K_, y0, len - 1));
    const Tensor ytgt = gather_columns(y, tgt_cols);

    metrics::SplitMetrics sm;
    sm.lin_loss = metrics::mse(ytgt, yroll);
    sm.lin_anae = metrics::anae(ytgt, yroll, cfg_.anae_zero_epsilon);

    const Tensor xhat = nets::forward_plain(ae_.decoder, y);
    sm.recon_loss = metrics::mse(xb, xhat);
    sm.recon_anae = metrics::anae(xb_raw, scaler_.inverse(xhat), cfg_.anae_zero_epsilon);

    const Tensor xpred = nets::forward_plain(ae_.decoder, yroll);
    sm.pred_loss = metrics::mse(gather_columns(xb, tgt_cols), xpred);
    sm.pred_anae = metrics::anae(gather_columns(xb_raw, tgt_cols), scaler_.inverse(xpred),
                                 cfg_.anae_zero_epsilon);

    double kreg = 0.0;
    for (int64_t i = 0; i < K_.size(); ++i) {
        kreg += K_[i] * K_[i];
    }
    sm.total_loss = metrics::total_loss_value(sm.recon_loss, sm.lin_loss, sm.pred_loss,
                                              weight_decay_value(ae_), kreg, cfg_.weights());
    return sm;
}

metrics::SplitMetrics TrajPred::test_net() const {
    if (!trained_) {
        throw NotTrained("test_net: model is not trained");
    }
    if (!ds_ || ds_->test.empty()) {
        throw NoTestSplit("test_net: no test split in the dataset");
    }
    return evaluate(ds_->test);
}

std::vector<Tensor> TrajPred::predict_new(const Tensor& X0, int64_t m) const {
    if (!trained_) {
        throw NotTrained("predict_new: model is not trained");
    }
    if (X0.rows() != static_cast<int64_t>(scaler_.shifts().size())) {
        throw ShapeMismatch("predict_new: initial states have " + std::to_string(X0.rows()) +
                            " features, model expects " +
                            std::to_string(scaler_.shifts().size()));
    }
    const Tensor y0 = nets::forward_plain(ae_.encoder, scaler_.transform(X0));
    const std::vector<Tensor> rolls = rollout(K_, y0, m);

    std::vector<Tensor> out(static_cast<size_t>(X0.cols()));
    for (int64_t k = 0; k < X0.cols(); ++k) {
        out[static_cast<size_t>(k)] = Tensor(X0.rows(), m);
    }
    for (int64_t s = 0; s < m; ++s) {
        const Tensor xs = scaler_.inverse(nets::forward_plain(ae_.decoder, rolls[static_cast<size_t>(s)]));
        for (int64_t k = 0; k < X0.cols(); ++k) {
            for (int64_t i = 0; i < X0.rows(); ++i) {
                out[static_cast<size_t>(k)].at(i, s) = xs.at(i, k);
            }
        }
    }
    return out;
}

std::vector<Tensor> TrajPred::predict_new(const Tensor& X0) const {
    return predict_new(X0, m_);
}

} // namespace trajpred
