// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#include "ndgait/pipeline/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <thread>

#include "ndgait/error.hpp"
#include "ndgait/fusion/fusion.hpp"
#include "ndgait/pipeline/optim.hpp"

namespace ndg::pipeline {

std::size_t worker_threads() {
    if (const char *env = std::getenv("NDG_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::string> Dataset::subjects() const {
    std::set<std::string> s;
    for (const auto &p : sessions) s.insert(p->subject_id);
    return {s.begin(), s.end()};
}

std::vector<data::SessionPtr> Dataset::of(const std::vector<std::string> &subjects) const {
    const std::set<std::string> want(subjects.begin(), subjects.end());
    std::vector<data::SessionPtr> out;
    for (const auto &p : sessions)
        if (want.count(p->subject_id)) out.push_back(p);
    return out;
}

Dataset prepare_dataset(const std::vector<data::RawSession> &raw, const data::PreprocessConfig &pre) {
    Dataset ds;
    for (const auto &s : raw)
        ds.sessions.push_back(std::make_shared<const data::RawSession>(data::preprocess_session(s, pre).session));
    return ds;
}

void AuditLog::record(const std::string &stage, const data::RawSession &s) {
    entries_.push_back({stage, s.subject_id, s.session_id});
}

void AuditLog::check_no_leak(const data::FoldPlan &plan) const {
    const std::set<std::string> test(plan.test_subjects.begin(), plan.test_subjects.end());
    for (const auto &e : entries_)
        if (test.count(e.subject_id))
            throw ContractError("stage " + e.stage + " read test subject " + e.subject_id + " session " +
                                e.session_id);
}

void AuditLog::write_csv(const std::string &path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << "stage,subject_id,session_id\n";
    for (const auto &e : entries_) os << e.stage << ',' << e.subject_id << ',' << e.session_id << '\n';
}

void write_epochs_csv(const TrainReport &r, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << "epoch,lr,total";
    if (!r.epochs.empty())
        for (const auto &c : r.epochs[0].components) os << ',' << c.first;
    os << ",val\n" << std::setprecision(9);
    for (const auto &e : r.epochs) {
        os << e.epoch << ',' << e.lr << ',' << e.total;
        for (const auto &c : e.components) os << ',' << c.second;
        os << ',' << e.val << '\n';
    }
}

namespace {

using Clock = std::chrono::steady_clock;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Endless shuffled stream of batch indices over n items.
class BatchStream {
public:
    BatchStream(std::size_t n, Rng &rng) : perm_(n), rng_(rng) {
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        rng_.shuffle(perm_.begin(), perm_.end());
    }
    std::vector<std::size_t> next(std::size_t B) {
        B = std::min(B, perm_.size());
        if (pos_ + B > perm_.size()) {
            rng_.shuffle(perm_.begin(), perm_.end());
            pos_ = 0;
        }
        std::vector<std::size_t> out(perm_.begin() + pos_, perm_.begin() + pos_ + B);
        pos_ += B;
        return out;
    }

private:
    std::vector<std::size_t> perm_;
    std::size_t pos_ = 0;
    Rng &rng_;
};

std::vector<data::WindowSample> windows_of(const std::vector<data::SessionPtr> &ss, std::size_t win,
                                           std::size_t stride, const char *stage, AuditLog *log) {
    std::vector<data::WindowSample> out;
    for (std::size_t i = 0; i < ss.size(); ++i) {
        auto w = data::segment_windows(ss[i], i, win, stride);
        out.insert(out.end(), w.begin(), w.end());
        if (log) log->record(stage, *ss[i]);
    }
    return out;
}

std::vector<data::WindowSample> evenly_spaced(std::vector<data::WindowSample> ws, std::size_t k) {
    if (k == 0 || ws.size() <= k) return ws;
    std::vector<data::WindowSample> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(ws[i * ws.size() / k]);
    return out;
}

std::vector<diff::Parameter<Real> *> trainable(auto &owner) {
    std::vector<diff::Parameter<Real> *> ps;
    owner.visit(nets::ParamVisitor<Real>([&](diff::Parameter<Real> &p, bool buffer) {
        if (!buffer && p.trainable) ps.push_back(&p);
    }));
    return ps;
}

objectives::Stage1Terms stage1_terms(const RunConfig &c) {
    return {!c.ablation.no_rec, !c.ablation.no_pred, !c.ablation.no_rcl, c.w_rec, c.w_pred, c.w_rcl};
}

fusion::Stage2Terms stage2_terms(const RunConfig &c) { return {!c.ablation.no_fusion, c.w_sup, c.w_df}; }

void check_finite(double v, const char *stage, std::size_t epoch, std::size_t step) {
    if (!std::isfinite(v))
        throw NumericError(std::string(stage) + ": non-finite loss " + std::to_string(v) + " at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
}

Tensor<Real> gather(const Tensor<Real> &X, const std::vector<std::size_t> &idx) {
    const std::size_t d = X.dim(1);
    Tensor<Real> out({idx.size(), d});
    for (std::size_t n = 0; n < idx.size(); ++n) std::copy_n(X.ptr() + idx[n] * d, d, out.ptr() + n * d);
    return out;
}

/// Mean squared norm of the unmasked mixture error (uniform under no_fusion).
double mixture_loss(Model &m, const Tensor<Real> &Z, const Tensor<double> &Y) {
    if (Z.dim(0) == 0) return kNaN;
    const auto p = fusion::inference_predict(Z, m.heads, m.scorer, m.cfg.ablation.no_fusion);
    double s = 0;
    for (std::size_t i = 0; i < Y.size(); ++i) s += (p.yhat[i] - Y[i]) * (p.yhat[i] - Y[i]);
    return s / static_cast<double>(Y.dim(0));
}

struct Early {
    std::size_t patience;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, bad = 0;
    // true when this epoch is the new best
    bool update(double val, std::size_t epoch) {
        if (std::isnan(val)) {
            best_epoch = epoch;
            return true;
        }
        if (val < best) {
            best = val;
            best_epoch = epoch;
            bad = 0;
            return true;
        }
        ++bad;
        return false;
    }
    bool stop() const { return patience > 0 && bad >= patience; }
};

} // namespace

Tensor<Real> encode_windows(nets::EEGEncoder<Real> &enc, const std::vector<data::WindowSample> &ws,
                            std::size_t batch_size) {
    const std::size_t N = ws.size(), d = enc.latent();
    Tensor<Real> Z({N, d});
    if (N == 0) return Z;
    const std::size_t nb = (N + batch_size - 1) / batch_size;
    // a no-grad tape only reads parameters, so batches can run concurrently
    auto run = [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            std::vector<std::size_t> idx;
            for (std::size_t i = b * batch_size; i < std::min(N, (b + 1) * batch_size); ++i) idx.push_back(i);
            Tape<Real> tape(0, false);
            const auto z = enc.forward(tape, tape.constant(data::stack_eeg<Real>(ws, idx)));
            std::copy_n(z.data(), idx.size() * d, Z.ptr() + idx[0] * d);
        }
    };
    const std::size_t nt = std::min(worker_threads(), nb);
    if (nt <= 1) {
        run(0, nb);
        return Z;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(run, t * nb / nt, (t + 1) * nb / nt);
    for (auto &th : pool) th.join();
    return Z;
}

TrainReport train_stage1(Model &m, const std::vector<data::SessionPtr> &train,
                         const std::vector<data::SessionPtr> &val, AuditLog *log) {
    const auto &c = m.cfg;
    c.validate();
    const auto t0 = Clock::now();
    const auto tw = windows_of(train, c.net.window, c.train_stride, "stage1", log);
    const auto vw = evenly_spaced(windows_of(val, c.net.window, c.train_stride, "stage1-val", log), c.val_windows);
    if (tw.size() < 2) throw ConfigError("train_stage1: need at least 2 training windows");

    Rng rng(derive_seed(c.seed, 10));
    BatchStream stream(tw.size(), rng);
    const std::size_t B = c.batch_size;
    const std::size_t S = c.steps_per_epoch ? c.steps_per_epoch : std::max<std::size_t>(1, tw.size() / B);
    const std::size_t total = S * c.epochs, warm = S * c.warmup_epochs;
    const auto terms = stage1_terms(c);
    Adam<Real> opt(trainable(m.s1));
    Early early{c.patience};
    auto best = m.s1;
    TrainReport rep;

    auto val_loss = [&]() {
        if (vw.size() < 2) return kNaN;
        double s = 0;
        std::size_t n = 0;
        for (std::size_t b = 0; b < vw.size(); b += B) {
            std::vector<std::size_t> idx;
            for (std::size_t i = b; i < std::min(vw.size(), b + B); ++i) idx.push_back(i);
            if (idx.size() < 2) break;
            Tape<Real> tape(0, false);
            const auto l = objectives::stage1_total(tape, m.s1, data::stack_eeg<Real>(vw, idx),
                                                    data::stack_motion<Real>(vw, idx), terms, nets::NormMode::Eval);
            s += static_cast<double>(l.total.item()) * static_cast<double>(idx.size());
            n += idx.size();
        }
        return s / static_cast<double>(n);
    };

    std::size_t step = 0;
    for (std::size_t e = 0; e < c.epochs; ++e) {
        EpochStats es;
        es.epoch = e + 1;
        double sum = 0, rec = 0, pred = 0, rcl = 0;
        for (std::size_t k = 0; k < S; ++k, ++step) {
            const auto idx = stream.next(B);
            const double lr = cosine_warmup_lr(step + 1, total, warm, c.stage1.lr_max, c.stage1.lr_min);
            opt.zero_grad();
            Tape<Real> tape(derive_seed(c.seed, step), true);
            const auto l = objectives::stage1_total(tape, m.s1, data::stack_eeg<Real>(tw, idx),
                                                    data::stack_motion<Real>(tw, idx), terms, nets::NormMode::Train);
            const double v = static_cast<double>(l.total.item());
            check_finite(v, "stage1", e + 1, step);
            tape.backward(l.total);
            opt.step(lr);
            m.s1.eeg.apply_max_norm(c.net.max_norm);
            sum += v;
            rec += l.rec;
            pred += l.pred;
            rcl += l.rcl;
            es.lr = lr;
        }
        const double inv = 1.0 / static_cast<double>(S);
        es.total = sum * inv;
        if (terms.rec) es.components.emplace_back("rec", rec * inv);
        if (terms.pred) es.components.emplace_back("pred", pred * inv);
        if (terms.rcl) es.components.emplace_back("rcl", rcl * inv);
        es.val = val_loss();
        rep.epochs.push_back(es);
        if (early.update(es.val, e + 1)) best = m.s1;
        if (early.stop()) break;
    }
    m.s1 = std::move(best);
    m.stage = "stage1";
    m.step += step;
    m.rng_state = rng.state();
    rep.best_epoch = early.best_epoch;
    rep.steps = step;
    rep.seconds = seconds_since(t0);
    return rep;
}

TrainReport train_stage2(Model &m, const std::vector<data::SessionPtr> &train,
                         const std::vector<data::SessionPtr> &val, AuditLog *log) {
    const auto &c = m.cfg;
    c.validate();
    const auto t0 = Clock::now();
    if (train.empty()) throw ConfigError("train_stage2: no training sessions");
    if (!c.ablation.no_fusion && train.size() < 2)
        throw ConfigError("train_stage2: domain fusion needs at least 2 source sessions");
    std::vector<std::string> keys;
    for (const auto &s : train) keys.push_back(s->key());
    Rng rng(derive_seed(c.seed, 20));
    if (!m.has_heads())
        init_heads(m, keys, rng);
    else if (m.heads.count() != keys.size())
        throw ConfigError("train_stage2: model has " + std::to_string(m.heads.count()) + " heads but the fold has " +
                          std::to_string(keys.size()) + " source sessions");
    m.source_sessions = keys;

    const auto tw = windows_of(train, c.net.window, c.stage2_stride, "stage2", log);
    const auto vw = evenly_spaced(windows_of(val, c.net.window, c.stage2_stride, "stage2-val", log), c.val_windows);
    std::vector<std::size_t> all(tw.size()), vall(vw.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::iota(vall.begin(), vall.end(), std::size_t{0});
    const auto Y = data::stack_final_frames<Real>(tw, all);
    const Tensor<double> Yv = vw.empty() ? Tensor<double>({0, c.net.joints}) : data::stack_final_frames<double>(vw, vall);
    std::vector<std::size_t> sess(tw.size());
    for (std::size_t i = 0; i < tw.size(); ++i) sess[i] = tw[i].session_index;

    const bool frozen = c.freeze_encoder_stage2;
    Tensor<Real> Z;
    if (frozen) Z = encode_windows(m.s1.eeg, tw);

    std::vector<diff::Parameter<Real> *> params = trainable(m.heads);
    for (auto *p : trainable(m.scorer)) params.push_back(p);
    if (!frozen)
        for (auto *p : trainable(m.s1.eeg)) params.push_back(p);
    Adam<Real> opt(params);

    BatchStream stream(tw.size(), rng);
    const std::size_t B = c.batch_size;
    const std::size_t S =
        c.stage2_steps_per_epoch ? c.stage2_steps_per_epoch : std::max<std::size_t>(1, tw.size() / B);
    const std::size_t total = S * c.stage2_epochs, warm = S * c.warmup_epochs;
    const auto terms = stage2_terms(c);
    Early early{c.patience};
    auto best_heads = m.heads;
    auto best_scorer = m.scorer;
    auto best_eeg = m.s1.eeg;
    TrainReport rep;

    std::size_t step = 0;
    for (std::size_t e = 0; e < c.stage2_epochs; ++e) {
        EpochStats es;
        es.epoch = e + 1;
        double sum = 0, sup = 0, df = 0;
        for (std::size_t k = 0; k < S; ++k, ++step) {
            const auto idx = stream.next(B);
            const double lr = cosine_warmup_lr(step + 1, total, warm, c.stage2.lr_max, c.stage2.lr_min);
            opt.zero_grad();
            Tape<Real> tape(derive_seed(c.seed, step), true);
            std::vector<std::size_t> s(idx.size());
            for (std::size_t n = 0; n < idx.size(); ++n) s[n] = sess[idx[n]];
            Var<Real> z = frozen ? tape.constant(gather(Z, idx))
                                 : m.s1.eeg.forward(tape, tape.constant(data::stack_eeg<Real>(tw, idx)));
            const auto l = fusion::stage2_total(tape, z, s, tape.constant(gather(Y, idx)), m.heads, m.scorer, terms);
            const double v = static_cast<double>(l.total.item());
            check_finite(v, "stage2", e + 1, step);
            tape.backward(l.total);
            opt.step(lr);
            if (!frozen) m.s1.eeg.apply_max_norm(c.net.max_norm);
            sum += v;
            sup += l.sup;
            df += l.df;
            es.lr = lr;
        }
        const double inv = 1.0 / static_cast<double>(S);
        es.total = sum * inv;
        es.components.emplace_back("sup", sup * inv);
        if (terms.fusion) es.components.emplace_back("df", df * inv);
        es.val = vw.empty() ? kNaN : mixture_loss(m, encode_windows(m.s1.eeg, vw), Yv);
        rep.epochs.push_back(es);
        if (early.update(es.val, e + 1)) {
            best_heads = m.heads;
            best_scorer = m.scorer;
            if (!frozen) best_eeg = m.s1.eeg;
        }
        if (early.stop()) break;
    }
    m.heads = std::move(best_heads);
    m.scorer = std::move(best_scorer);
    if (!frozen) m.s1.eeg = std::move(best_eeg);
    m.stage = "stage2";
    m.step += step;
    m.rng_state = rng.state();
    rep.best_epoch = early.best_epoch;
    rep.steps = step;
    rep.seconds = seconds_since(t0);
    return rep;
}

EvalResult evaluate(Model &m, const std::vector<data::SessionPtr> &test, const std::string &fold,
                    std::size_t t_start_min) {
    if (!m.has_heads()) throw ConfigError("evaluate: model has no Stage II heads");
    EvalResult out;
    const std::size_t W = m.cfg.net.window;
    for (const auto &s : test) {
        if (s->length() < t_start_min + W) continue;
        std::vector<data::WindowSample> ws;
        for (const auto &w : data::segment_windows(s, 0, W, m.cfg.eval_stride))
            if (w.t_start() >= t_start_min) ws.push_back(w);
        std::vector<std::size_t> all(ws.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        SessionPredictions p;
        p.subject_id = s->subject_id;
        p.session_id = s->session_id;
        for (const auto &w : ws) p.t_end.push_back(w.t_end);
        p.y = data::stack_final_frames<double>(ws, all);
        auto mix = fusion::inference_predict(encode_windows(m.s1.eeg, ws), m.heads, m.scorer,
                                             m.cfg.ablation.no_fusion);
        p.yhat = std::move(mix.yhat);
        p.entropy = std::move(mix.entropy);
        auto names = s->joint_names;
        if (names.size() != s->num_joints()) {
            names.clear();
            for (std::size_t j = 0; j < s->num_joints(); ++j) names.push_back("j" + std::to_string(j));
        }
        out.reports.push_back(eval::compute_report(p.y, p.yhat, names, fold, s->subject_id, s->session_id));
        out.predictions.push_back(std::move(p));
    }
    return out;
}

void write_predictions_csv(const EvalResult &r, const std::vector<std::string> &joint_names, const std::string &fold,
                           const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path);
    os << "fold,subject,trial,t_end";
    for (const auto &j : joint_names) os << ",y_" << j;
    for (const auto &j : joint_names) os << ",yhat_" << j;
    os << '\n' << std::setprecision(17);
    for (const auto &p : r.predictions) {
        const std::size_t J = p.y.dim(1);
        if (J != joint_names.size()) throw ShapeError("write_predictions_csv: joint name count mismatch");
        for (std::size_t n = 0; n < p.t_end.size(); ++n) {
            os << fold << ',' << p.subject_id << ',' << p.session_id << ',' << p.t_end[n];
            for (std::size_t j = 0; j < J; ++j) os << ',' << p.y[n * J + j];
            for (std::size_t j = 0; j < J; ++j) os << ',' << p.yhat[n * J + j];
            os << '\n';
        }
    }
}

FinetuneResult finetune_target(Model &m, const data::SessionPtr &target, const std::string &fold, AuditLog *log) {
    const auto &c = m.cfg;
    if (!m.has_heads()) throw ConfigError("finetune_target: model has no Stage II heads");
    const std::size_t W = c.net.window;
    const auto tune_end = static_cast<std::size_t>(std::llround(c.finetune_s * target->fs));
    const auto boundary = static_cast<std::size_t>(std::llround((c.finetune_s + c.finetune_val_s) * target->fs));
    if (target->length() < boundary + W)
        throw ConfigError("finetune_target: session " + target->key() + " has " + std::to_string(target->length()) +
                          " samples; fine-tuning needs " + std::to_string(boundary) +
                          " plus one evaluation window");
    FinetuneResult res;
    res.boundary = boundary;
    res.zero_shot = evaluate(m, {target}, fold, boundary);

    std::vector<data::WindowSample> tw, vw;
    for (const auto &w : data::segment_windows(target, 0, W, c.stage2_stride)) {
        if (w.t_end < tune_end)
            tw.push_back(w);
        else if (w.t_start() >= tune_end && w.t_end < boundary)
            vw.push_back(w);
    }
    if (log) log->record("finetune", *target);
    res.tune_windows = tw.size();
    res.val_windows = vw.size();
    if (tw.size() < 2 || vw.empty()) throw ConfigError("finetune_target: fine-tune spans hold too few windows");

    std::vector<std::size_t> ta(tw.size()), va(vw.size());
    std::iota(ta.begin(), ta.end(), std::size_t{0});
    std::iota(va.begin(), va.end(), std::size_t{0});
    const auto Y = data::stack_final_frames<Real>(tw, ta);
    const auto Yv = data::stack_final_frames<double>(vw, va);
    const bool live = c.finetune_encoder;
    Tensor<Real> Z = encode_windows(m.s1.eeg, tw);

    std::vector<diff::Parameter<Real> *> params = trainable(m.heads);
    if (!c.ablation.no_fusion)
        for (auto *p : trainable(m.scorer)) params.push_back(p);
    if (live)
        for (auto *p : trainable(m.s1.eeg)) params.push_back(p);
    Adam<Real> opt(params);
    Rng rng(derive_seed(c.seed, 30));
    BatchStream stream(tw.size(), rng);
    const std::size_t B = c.batch_size, S = std::max<std::size_t>(1, tw.size() / B);
    const std::size_t total = S * c.finetune_epochs;
    const std::size_t warm = std::min(S * c.warmup_epochs, total - 1);
    Early early{c.patience};
    auto best_heads = m.heads;
    auto best_scorer = m.scorer;
    auto best_eeg = m.s1.eeg;
    const std::size_t K = m.heads.count();
    // the zero-shot state competes as epoch 0
    early.update(mixture_loss(m, encode_windows(m.s1.eeg, vw), Yv), 0);

    std::size_t step = 0;
    for (std::size_t e = 0; e < c.finetune_epochs; ++e) {
        EpochStats es;
        es.epoch = e + 1;
        double sum = 0;
        for (std::size_t k = 0; k < S; ++k, ++step) {
            const auto idx = stream.next(B);
            const double lr = cosine_warmup_lr(step + 1, total, warm, c.stage2.lr_max, c.stage2.lr_min);
            opt.zero_grad();
            Tape<Real> tape(derive_seed(c.seed, step), true);
            Var<Real> z = live ? m.s1.eeg.forward(tape, tape.constant(data::stack_eeg<Real>(tw, idx)))
                               : tape.constant(gather(Z, idx));
            auto H = m.heads.forward(tape, z);
            Var<Real> alpha = c.ablation.no_fusion
                                  ? tape.constant(Tensor<Real>({idx.size(), K}, Real(1) / static_cast<Real>(K)))
                                  : fusion::domain_weights(m.scorer.forward(tape, z), {});
            auto l = fusion::loss_domain_fusion(fusion::mixture_predict(H, alpha), tape.constant(gather(Y, idx)));
            const double v = static_cast<double>(l.item());
            check_finite(v, "finetune", e + 1, step);
            tape.backward(l);
            opt.step(lr);
            if (live) m.s1.eeg.apply_max_norm(c.net.max_norm);
            sum += v;
            es.lr = lr;
        }
        es.total = sum / static_cast<double>(S);
        es.components.emplace_back("df", es.total);
        es.val = mixture_loss(m, encode_windows(m.s1.eeg, vw), Yv);
        res.report.epochs.push_back(es);
        if (early.update(es.val, e + 1)) {
            best_heads = m.heads;
            best_scorer = m.scorer;
            if (live) best_eeg = m.s1.eeg;
        }
        if (early.stop()) break;
    }
    m.heads = std::move(best_heads);
    m.scorer = std::move(best_scorer);
    if (live) m.s1.eeg = std::move(best_eeg);
    m.stage = "finetune";
    m.step += step;
    res.report.best_epoch = early.best_epoch;
    res.report.steps = step;
    res.finetuned = evaluate(m, {target}, fold, boundary);
    return res;
}

FoldResult run_fold(const RunConfig &cfg, const Dataset &ds, const data::FoldPlan &plan, const std::string &fold,
                    AuditLog *log, const Model *stage1_init) {
    FoldResult r;
    r.fold = fold;
    const auto train = ds.of(plan.train_subjects), val = ds.of(plan.val_subjects), test = ds.of(plan.test_subjects);
    if (stage1_init) {
        r.model = *stage1_init;
        r.model.cfg = cfg;
        r.model.heads = {};
        r.model.scorer = {};
        r.model.source_sessions.clear();
    } else {
        r.model = init_model(cfg);
        if (!cfg.ablation.no_stage1) r.stage1 = train_stage1(r.model, train, val, log);
    }
    r.stage2 = train_stage2(r.model, train, val, log);
    r.eval = evaluate(r.model, test, fold);
    return r;
}

double mean_r(const std::vector<eval::MetricsReport> &reports) {
    if (reports.empty()) return kNaN;
    double s = 0;
    for (const auto &r : reports) s += r.mean_r;
    return s / static_cast<double>(reports.size());
}

} // namespace ndg::pipeline
