#include "koopman/statepred.hpp"

#include "koopman/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace koopman::statepred {

EigMode eig_mode_from_string(const std::string& name) {
    if (name == "projected") {
        return EigMode::Projected;
    }
    if (name == "exact") {
        return EigMode::Exact;
    }
    throw ConfigError("unknown eigenvector_mode '" + name + "' (projected | exact)");
}

std::string to_string(EigMode mode) {
    return mode == EigMode::Projected ? "projected" : "exact";
}

void StatePredConfig::validate() const {
    if (encoded_size < 1) {
        throw InvalidParams("StatePredConfig: encoded_size must be >= 1");
    }
    if (rank < 1 || rank > encoded_size) {
        throw InvalidParams("StatePredConfig: rank must satisfy 1 <= rank <= encoded_size");
    }
    if (numepochs < 0 || learning_rate <= 0.0) {
        throw InvalidParams("StatePredConfig: numepochs >= 0, learning_rate > 0 required");
    }
    weights.validate();
}

namespace {

constexpr double kExactModeZeroTol = 1e-12;

/// Shared by the plain fit and the final freeze: reduced operator pieces.
struct DmdPieces {
    SvdResult svd; // of Y_prev
    Tensor M;      // Y_next V_r S_r^{-1}, d x r
    Tensor reduced; // U_r^T M, r x r
};

DmdPieces dmd_pieces(const Tensor& Y_prev, const Tensor& Y_next, int64_t rank) {
    DmdPieces p;
    p.svd = svd_truncated(Y_prev, rank);
    if (p.svd.effective_rank < rank) {
        throw RankTooLarge("koopman fit: requested rank " + std::to_string(rank) +
                           " exceeds effective rank " +
                           std::to_string(p.svd.effective_rank) + " of Y_prev");
    }
    Tensor vs = p.svd.V; // V_r S_r^{-1}
    for (int64_t i = 0; i < vs.rows(); ++i) {
        for (int64_t j = 0; j < vs.cols(); ++j) {
            vs.at(i, j) /= p.svd.S[static_cast<size_t>(j)];
        }
    }
    p.M = matmul(Y_next, vs);
    p.reduced = matmul(p.svd.U.transpose(), p.M);
    return p;
}

void check_nonzero_eigenvalues(const Tensor& lambda) {
    for (int64_t k = 0; k < lambda.rows(); ++k) {
        if (std::abs(lambda.c(k)) == 0.0) {
            throw DefectiveMatrix("koopman fit: fitted operator has a zero eigenvalue; "
                                  "continuous eigenvalues are undefined");
        }
    }
}

} // namespace

KoopmanEigen koopman_fit(const Tensor& Y, int64_t rank, EigMode mode) {
    if (!Y.is_real()) {
        throw ShapeMismatch("koopman_fit: encoded states must be real");
    }
    const int64_t n = Y.cols();
    if (n < 2) {
        throw InvalidParams("koopman_fit: need at least 2 encoded states");
    }
    Tensor Y_prev(Y.rows(), n - 1), Y_next(Y.rows(), n - 1);
    for (int64_t i = 0; i < Y.rows(); ++i) {
        for (int64_t j = 0; j + 1 < n; ++j) {
            Y_prev.at(i, j) = Y.at(i, j);
            Y_next.at(i, j) = Y.at(i, j + 1);
        }
    }
    DmdPieces p = dmd_pieces(Y_prev, Y_next, rank);
    EigResult eg = eig(p.reduced);
    check_nonzero_eigenvalues(eg.eigenvalues);
    const int64_t r = p.svd.effective_rank;

    KoopmanEigen ke;
    ke.rank = r;
    ke.Lambda = eg.eigenvalues;
    if (mode == EigMode::Projected) {
        ke.W = matmul(p.svd.U.to_complex(), eg.eigenvectors);
    } else {
        // Exact modes W_k = (1/lambda_k) Y_next V_r S_r^{-1} w_k; near-zero
        // eigenvalues fall back to the projected mode.
        const Tensor wm = matmul(p.M.to_complex(), eg.eigenvectors);
        const Tensor wproj = matmul(p.svd.U.to_complex(), eg.eigenvectors);
        ke.W = Tensor(Y.rows(), r, Scalar::Complex128);
        for (int64_t k = 0; k < r; ++k) {
            const cplx lam = eg.eigenvalues.c(k);
            if (std::abs(lam) < kExactModeZeroTol) {
                log::warn("koopman_fit: eigenvalue " + std::to_string(k) +
                          " is (near) zero; exact eigenvector falls back to projected");
                for (int64_t i = 0; i < Y.rows(); ++i) {
                    ke.W.cat(i, k) = wproj.cat(i, k);
                }
            } else {
                for (int64_t i = 0; i < Y.rows(); ++i) {
                    ke.W.cat(i, k) = wm.cat(i, k) / lam;
                }
            }
        }
    }

    ke.Omega = Tensor(r, 1, Scalar::Complex128);
    for (int64_t k = 0; k < r; ++k) {
        ke.Omega.c(k) = std::log(ke.Lambda.c(k)); // principal branch
    }

    Tensor y0(Y.rows(), 1);
    for (int64_t i = 0; i < Y.rows(); ++i) {
        y0[i] = Y.at(i, 0);
    }
    ke.b = matmul(pinv(ke.W), y0.to_complex());
    return ke;
}

Tensor dmd_operator(const Tensor& Y_prev, const Tensor& Y_next, int64_t rank) {
    if (!Y_prev.same_shape(Y_next)) {
        throw ShapeMismatch("dmd_operator: Y_prev " + Y_prev.shape_str() + " vs Y_next " +
                            Y_next.shape_str());
    }
    DmdPieces p = dmd_pieces(Y_prev, Y_next, rank);
    return matmul(p.M, p.svd.U.transpose());
}

Tensor evolve(const KoopmanEigen& ke, double i, double* max_imag) {
    Tensor e = matexp_eigs(ke.Omega, i);
    Tensor yc = matmul(ke.W, hadamard(e, ke.b));
    double maxim = 0.0, maxre = 0.0;
    for (int64_t k = 0; k < yc.rows(); ++k) {
        maxim = std::max(maxim, std::abs(yc.c(k).imag()));
        maxre = std::max(maxre, std::abs(yc.c(k).real()));
    }
    if (max_imag != nullptr) {
        *max_imag = maxim;
    }
    if (maxim > 1e-4 * std::max(maxre, 1e-300)) {
        log::warn("evolve: imaginary residual " + std::to_string(maxim) +
                  " exceeds 1e-4 * max|Re| at index " + std::to_string(i));
    }
    return yc.real_part();
}

Tensor evolve_many(const KoopmanEigen& ke, const std::vector<double>& indexes,
                   double* max_imag) {
    Tensor out(ke.W.rows(), static_cast<int64_t>(indexes.size()));
    double worst = 0.0;
    for (size_t j = 0; j < indexes.size(); ++j) {
        double mi = 0.0;
        Tensor col = evolve(ke, indexes[j], &mi);
        worst = std::max(worst, mi);
        for (int64_t i = 0; i < out.rows(); ++i) {
            out.at(i, static_cast<int64_t>(j)) = col[i];
        }
    }
    if (max_imag != nullptr) {
        *max_imag = worst;
    }
    return out;
}

// -----------------------------------------------------------------------------
// StatePred
// -----------------------------------------------------------------------------

StatePred::StatePred(data::SnapshotDataset ds, StatePredConfig cfg) {
    cfg.validate();
    const int64_t n = ds.n_train();
    if (cfg.rank > std::min(cfg.encoded_size, n - 1)) {
        throw InvalidParams("StatePred: rank must be <= min(encoded_size, n_train - 1)");
    }

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
    scaler_ = cfg.scale_features ? data::Scaler::fit(ds.train.X)
                                 : data::Scaler::identity(ds.dim());
    Xs_ = scaler_.transform(ds.train.X);
    index_map_ = ds.index_map;
    cfg_ = std::move(cfg);
    ds_ = std::move(ds);
}

StatePred StatePred::restore(StatePredConfig cfg, nets::AutoencoderParams ae, KoopmanEigen ke,
                             data::Scaler scaler, data::IndexMap map) {
    StatePred sp;
    sp.cfg_ = std::move(cfg);
    sp.ae_ = std::move(ae);
    sp.ke_ = std::move(ke);
    sp.scaler_ = std::move(scaler);
    sp.index_map_ = map;
    sp.trained_ = true;
    return sp;
}

const KoopmanEigen& StatePred::koopman() const {
    if (!ke_) {
        throw NotTrained("StatePred: no fitted Koopman operator; call train_net() first");
    }
    return *ke_;
}

metrics::RunStats StatePred::train_net() {
    if (!ds_) {
        throw NotTrained("StatePred: model was restored without data; cannot train");
    }
    const int64_t n = Xs_.cols();
    const int64_t d_in = Xs_.rows();

    std::vector<double> targets; // internal indexes >= 1, in column order
    for (size_t k = 1; k < ds_->internal.size(); ++k) {
        targets.push_back(static_cast<double>(ds_->internal[k]));
    }

    // Original-unit references for ANAE reporting.
    Tensor x_raw = ds_->train.X;
    Tensor x_raw_targets(d_in, n - 1);
    for (int64_t i = 0; i < d_in; ++i) {
        for (int64_t j = 1; j < n; ++j) {
            x_raw_targets.at(i, j - 1) = x_raw.at(i, j);
        }
    }

    std::vector<Tensor*> params = nets::collect_parameters(ae_);
    nets::Adam adam(cfg_.learning_rate);
    metrics::RunStats stats;
    stats.epochs.reserve(static_cast<size_t>(cfg_.numepochs));

    ad::Tape tape;
    for (int64_t epoch = 0; epoch < cfg_.numepochs; ++epoch) {
        try {
            tape.clear();
            nets::MlpVars encv = nets::register_params(tape, ae_.encoder, true);
            nets::MlpVars decv = nets::register_params(tape, ae_.decoder, true);
            ad::Var X = tape.leaf(Xs_, false);

            ad::Var Y = nets::forward(ae_.encoder, encv, X);
            ad::Var Yprev = ad::slice_columns(Y, 0, n - 1);
            ad::Var Ynext = ad::slice_columns(Y, 1, n);

            ad::SvdVars svd = ad::svd_truncated(Yprev, cfg_.rank);
            if (svd.effective_rank < cfg_.rank) {
                throw RankTooLarge("koopman fit: requested rank " +
                                   std::to_string(cfg_.rank) + " exceeds effective rank " +
                                   std::to_string(svd.effective_rank) + " of Y_prev");
            }
            ad::Var VS = ad::col_scale(svd.V, ad::reciprocal(svd.S));
            ad::Var M = ad::matmul(Ynext, VS);
            ad::Var Ktil = ad::matmul(ad::transpose(svd.U), M);

            ad::EigVars eg = ad::eig(Ktil, cfg_.detach_eig_gradient);
            check_nonzero_eigenvalues(eg.eigenvalues.value());

            ad::Var W;
            if (cfg_.eigenvector_mode == EigMode::Projected) {
                W = ad::matmul(ad::to_complex(svd.U), eg.eigenvectors);
            } else {
                const Tensor& lam = eg.eigenvalues.value();
                bool any_small = false;
                for (int64_t k = 0; k < lam.rows(); ++k) {
                    any_small = any_small || std::abs(lam.c(k)) < kExactModeZeroTol;
                }
                ad::Var WM = ad::matmul(ad::to_complex(M), eg.eigenvectors);
                if (!any_small) {
                    W = ad::col_scale(WM, ad::reciprocal(eg.eigenvalues));
                } else {
                    log::warn("koopman fit: (near) zero eigenvalue; exact eigenvectors "
                              "fall back to projected for the affected modes");
                    ad::Var Wproj = ad::matmul(ad::to_complex(svd.U), eg.eigenvectors);
                    ad::Var lamRow = ad::transpose(eg.eigenvalues);
                    std::vector<ad::Var> cols;
                    for (int64_t k = 0; k < lam.rows(); ++k) {
                        if (std::abs(lam.c(k)) < kExactModeZeroTol) {
                            cols.push_back(ad::slice_columns(Wproj, k, k + 1));
                        } else {
                            ad::Var lk =
                                ad::reciprocal(ad::slice_columns(lamRow, k, k + 1));
                            cols.push_back(
                                ad::col_scale(ad::slice_columns(WM, k, k + 1), lk));
                        }
                    }
                    W = ad::concat_columns(cols);
                }
            }

            ad::Var Omega = ad::log_elem(eg.eigenvalues);
            ad::Var y0c = ad::to_complex(ad::slice_columns(Y, 0, 1));
            ad::Var b = ad::matmul(ad::pinv_from_svd(W), y0c);

            ad::Var E = ad::complex_exp_evolve(Omega, targets, b);
            ad::Var Yhat = ad::real_part(ad::matmul(W, E));

            ad::Var Ytgt = ad::slice_columns(Y, 1, n);
            ad::Var Llin = ad::mse(Ytgt, Yhat);

            ad::Var Xhat = nets::forward(ae_.decoder, decv, Y);
            ad::Var Lrecon = ad::mse(X, Xhat);

            ad::Var XpredHat = nets::forward(ae_.decoder, decv, Yhat);
            ad::Var Xtgt = ad::slice_columns(X, 1, n);
            ad::Var Lpred = ad::mse(Xtgt, XpredHat);

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

            ad::Var Kfull = ad::matmul(M, ad::transpose(svd.U));
            ad::Var Kreg = metrics::k_regularizer(metrics::ModelKind::StatePred, Kfull);

            ad::Var L = metrics::total_loss(Lrecon, Llin, Lpred, ae_decay, Kreg, cfg_.weights);
            tape.backward(L);

            metrics::EpochMetrics em;
            em.train.recon_loss = Lrecon.value()[0];
            em.train.lin_loss = Llin.value()[0];
            em.train.pred_loss = Lpred.value()[0];
            em.train.total_loss = L.value()[0];
            em.train.recon_anae =
                metrics::anae(x_raw, scaler_.inverse(Xhat.value()), cfg_.anae_zero_epsilon);
            em.train.lin_anae =
                metrics::anae(Ytgt.value(), Yhat.value(), cfg_.anae_zero_epsilon);
            em.train.pred_anae = metrics::anae(
                x_raw_targets, scaler_.inverse(XpredHat.value()), cfg_.anae_zero_epsilon);

            if (ds_->val) {
                KoopmanEigen ke;
                ke.W = W.value();
                ke.Lambda = eg.eigenvalues.value();
                ke.Omega = Omega.value();
                ke.b = b.value();
                ke.rank = svd.effective_rank;
                em.val = evaluate_split(*ds_->val, ke, ae_decay.value()[0], Kreg.value()[0]);
            }
            stats.epochs.push_back(em);

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
            adam.step(params, grads);
        } catch (const RankTooLarge& e) {
            throw RankTooLarge("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const DegenerateSpectrum& e) {
            throw DegenerateSpectrum("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const DefectiveMatrix& e) {
            throw DefectiveMatrix("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const ConvergenceFailure& e) {
            throw ConvergenceFailure("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }

    // Freeze the operator with the final parameters.
    Tensor Yfinal = nets::forward_plain(ae_.encoder, Xs_);
    ke_ = koopman_fit(Yfinal, cfg_.rank, cfg_.eigenvector_mode);
    final_ae_decay_ = 0.0;
    for (const nets::DenseLayer& l : ae_.encoder.layers) {
        final_ae_decay_ += l.W.frobenius_norm() * l.W.frobenius_norm();
    }
    for (const nets::DenseLayer& l : ae_.decoder.layers) {
        final_ae_decay_ += l.W.frobenius_norm() * l.W.frobenius_norm();
    }
    {
        Tensor yprev(Yfinal.rows(), n - 1), ynext(Yfinal.rows(), n - 1);
        for (int64_t i = 0; i < Yfinal.rows(); ++i) {
            for (int64_t j = 0; j + 1 < n; ++j) {
                yprev.at(i, j) = Yfinal.at(i, j);
                ynext.at(i, j) = Yfinal.at(i, j + 1);
            }
        }
        Tensor kfull = dmd_operator(yprev, ynext, cfg_.rank);
        double acc = 0.0;
        for (int64_t i = 0; i < kfull.size(); ++i) {
            acc += std::abs(kfull[i]);
        }
        final_k_decay_ = acc / static_cast<double>(kfull.size());
    }
    trained_ = true;

    if (ds_->test) {
        stats.test = test_net();
    }
    return stats;
}

metrics::SplitMetrics StatePred::evaluate_split(const data::SnapshotSplit& split,
                                                const KoopmanEigen& ke, double ae_decay,
                                                double k_decay) const {
    const Tensor xs = scaler_.transform(split.X);
    const Tensor y = nets::forward_plain(ae_.encoder, xs);

    std::vector<double> idx;
    idx.reserve(split.t.size());
    for (double t : split.t) {
        idx.push_back(index_map_.map_new_index(t));
    }
    const Tensor yhat = evolve_many(ke, idx);

    metrics::SplitMetrics sm;
    sm.lin_loss = metrics::mse(y, yhat);
    sm.lin_anae = metrics::anae(y, yhat, cfg_.anae_zero_epsilon);

    const Tensor xhat = nets::forward_plain(ae_.decoder, y);
    sm.recon_loss = metrics::mse(xs, xhat);
    sm.recon_anae = metrics::anae(split.X, scaler_.inverse(xhat), cfg_.anae_zero_epsilon);

    const Tensor xpred = nets::forward_plain(ae_.decoder, yhat);
    sm.pred_loss = metrics::mse(xs, xpred);
    sm.pred_anae = metrics::anae(split.X, scaler_.inverse(xpred), cfg_.anae_zero_epsilon);

    sm.total_loss = metrics::total_loss_value(sm.recon_loss, sm.lin_loss, sm.pred_loss,
                                              ae_decay, k_decay, cfg_.weights);
    return sm;
}

metrics::SplitMetrics StatePred::test_net() const {
    if (!trained_) {
        throw NotTrained("test_net: model is not trained");
    }
    if (!ds_ || !ds_->test || ds_->test->X.cols() == 0) {
        throw NoTestSplit("test_net: no test split in the dataset");
    }
    return evaluate_split(*ds_->test, *ke_, final_ae_decay_, final_k_decay_);
}

Tensor StatePred::predict_new(const std::vector<double>& t_new) const {
    if (!trained_) {
        throw NotTrained("predict_new: model is not trained");
    }
    std::vector<double> idx;
    idx.reserve(t_new.size());
    for (double t : t_new) {
        idx.push_back(index_map_.map_new_index(t));
    }
    const Tensor yhat = evolve_many(*ke_, idx);
    const Tensor xhat = scaler_.inverse(nets::forward_plain(ae_.decoder, yhat));
    return xhat.transpose(); // one state row per requested index
}

} // namespace koopman::statepred
