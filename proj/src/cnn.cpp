// SPDX-License-Identifier: Apache-2.0
#include "bdris/cnn.hpp"

#include "bdris/channel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace bdris {

RealMatrix cnn_features(const RealMatrix& c, int K) {
    if (K < 1 || c.cols() % K != 0 || c.cols() / K < 2) throw Error("cnn_features: need at least two intervals");
    const auto v = c.cols() / K;
    const double rms = std::sqrt(c.squaredNorm() / static_cast<double>(c.size()));
    RealMatrix f(c.rows(), (v - 1) * K);
    if (!(rms > 0.0)) {
        f.setConstant(-8.0);
        return f;
    }
    for (Eigen::Index j = 0; j < f.cols(); ++j)
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            const double d = std::fabs(c(i, j + K) - c(i, j)) / rms;
            f(i, j) = d > 1e-8 ? std::log10(d) : -8.0;
        }
    return f;
}

void CnnArchitecture::validate() const {
    if (kernel < 1 || conv1 < 1 || conv2 < 1 || fc1 < 1 || fc2 < 1 || outputs < 1)
        throw Error("cnn: layer sizes must be positive");
    const int r2 = (rows - kernel + 1) / 2 - kernel + 1;
    const int c2 = (cols - kernel + 1) / 2 - kernel + 1;
    if (r2 < 1 || c2 < 1)
        throw Error("cnn: input " + std::to_string(rows) + "x" + std::to_string(cols) + " is too small for the kernels");
}

namespace {

struct Layout {
    int k, c1, c2, r1, w1, pr, pw, r2, w2, f1, f2, out;
    std::size_t cw1, cb1, cw2, cb2, dw1, db1, dw2, db2, ow, ob, total;

    explicit Layout(const CnnArchitecture& a) {
        k = a.kernel;
        c1 = a.conv1;
        c2 = a.conv2;
        r1 = a.rows - k + 1;
        w1 = a.cols - k + 1;
        pr = r1 / 2;
        pw = w1 / 2;
        r2 = pr - k + 1;
        w2 = pw - k + 1;
        f1 = a.fc1;
        f2 = a.fc2;
        out = a.outputs;
        std::size_t o = 0;
        auto take = [&](std::size_t n) {
            const std::size_t at = o;
            o += n;
            return at;
        };
        const auto kk = static_cast<std::size_t>(k * k);
        cw1 = take(static_cast<std::size_t>(c1) * kk);
        cb1 = take(static_cast<std::size_t>(c1));
        cw2 = take(static_cast<std::size_t>(c2 * c1) * kk);
        cb2 = take(static_cast<std::size_t>(c2));
        dw1 = take(static_cast<std::size_t>(f1 * c2));
        db1 = take(static_cast<std::size_t>(f1));
        dw2 = take(static_cast<std::size_t>(f2 * f1));
        db2 = take(static_cast<std::size_t>(f2));
        ow = take(static_cast<std::size_t>(out * f2));
        ob = take(static_cast<std::size_t>(out));
        total = o;
    }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const RealVector>;
using VecMap = Eigen::Map<RealVector>;

// Feature maps are stored pixel-major: row i * width + j, one column per channel.
struct Activations {
    RealMatrix patches1;  // r1*w1 x k*k
    RealMatrix a1;        // r1*w1 x c1
    RealMatrix p;         // pr*pw x c1
    RealMatrix patches2;  // r2*w2 x c1*k*k
    RealMatrix a2;        // r2*w2 x c2
    RealVector g;
    RealVector h1;
    RealVector h2;
    RealVector y;
};

RealVector sigmoid(const RealVector& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

void run_forward(const CnnArchitecture& arch, const std::vector<double>& prm, double shift, double scale,
                 const RealMatrix& x, Activations& a) {
    const Layout L(arch);
    if (x.rows() != arch.rows || x.cols() != arch.cols)
        throw Error("cnn: input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", expected " +
                    std::to_string(arch.rows) + "x" + std::to_string(arch.cols));
    const int k = L.k;
    const RealMatrix xn = (x.array() - shift) / scale;

    a.patches1.resize(L.r1 * L.w1, k * k);
    for (int i = 0; i < L.r1; ++i)
        for (int j = 0; j < L.w1; ++j)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) a.patches1(i * L.w1 + j, u * k + v) = xn(i + u, j + v);
    const ConstRowMap w1(prm.data() + L.cw1, L.c1, k * k);
    const ConstVecMap b1(prm.data() + L.cb1, L.c1);
    a.a1.noalias() = a.patches1 * w1.transpose();
    a.a1 = (a.a1.rowwise() + b1.transpose()).array().tanh();

    a.p.resize(L.pr * L.pw, L.c1);
    for (int i = 0; i < L.pr; ++i)
        for (int j = 0; j < L.pw; ++j)
            a.p.row(i * L.pw + j) = 0.25 * (a.a1.row(2 * i * L.w1 + 2 * j) + a.a1.row(2 * i * L.w1 + 2 * j + 1) +
                                            a.a1.row((2 * i + 1) * L.w1 + 2 * j) +
                                            a.a1.row((2 * i + 1) * L.w1 + 2 * j + 1));

    a.patches2.resize(L.r2 * L.w2, L.c1 * k * k);
    for (int i = 0; i < L.r2; ++i)
        for (int j = 0; j < L.w2; ++j)
            for (int c = 0; c < L.c1; ++c)
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v)
                        a.patches2(i * L.w2 + j, (c * k + u) * k + v) = a.p((i + u) * L.pw + j + v, c);
    const ConstRowMap w2(prm.data() + L.cw2, L.c2, L.c1 * k * k);
    const ConstVecMap b2(prm.data() + L.cb2, L.c2);
    a.a2.noalias() = a.patches2 * w2.transpose();
    a.a2 = (a.a2.rowwise() + b2.transpose()).array().tanh();
    a.g = a.a2.colwise().mean().transpose();

    a.h1 = sigmoid(ConstRowMap(prm.data() + L.dw1, L.f1, L.c2) * a.g + ConstVecMap(prm.data() + L.db1, L.f1));
    a.h2 = sigmoid(ConstRowMap(prm.data() + L.dw2, L.f2, L.f1) * a.h1 + ConstVecMap(prm.data() + L.db2, L.f2));
    a.y = ConstRowMap(prm.data() + L.ow, L.out, L.f2) * a.h2 + ConstVecMap(prm.data() + L.ob, L.out);
}

/// Adds d(loss)/d(params) for one sample given dL/dy.
void run_backward(const CnnArchitecture& arch, const std::vector<double>& prm, const Activations& a,
                  const RealVector& dy, std::vector<double>& grad) {
    const Layout L(arch);
    const int k = L.k;
    double* gp = grad.data();

    RowMap(gp + L.ow, L.out, L.f2).noalias() += dy * a.h2.transpose();
    VecMap(gp + L.ob, L.out) += dy;
    RealVector dz = (ConstRowMap(prm.data() + L.ow, L.out, L.f2).transpose() * dy).cwiseProduct(
        a.h2.cwiseProduct((1.0 - a.h2.array()).matrix()));
    RowMap(gp + L.dw2, L.f2, L.f1).noalias() += dz * a.h1.transpose();
    VecMap(gp + L.db2, L.f2) += dz;
    dz = (ConstRowMap(prm.data() + L.dw2, L.f2, L.f1).transpose() * dz)
             .cwiseProduct(a.h1.cwiseProduct((1.0 - a.h1.array()).matrix()));
    RowMap(gp + L.dw1, L.f1, L.c2).noalias() += dz * a.g.transpose();
    VecMap(gp + L.db1, L.f1) += dz;
    const RealVector dg = ConstRowMap(prm.data() + L.dw1, L.f1, L.c2).transpose() * dz;

    const double inv_area = 1.0 / (L.r2 * L.w2);
    RealMatrix dz2 = (1.0 - a.a2.array().square()).matrix();
    dz2 = dz2 * (dg * inv_area).asDiagonal();
    RowMap(gp + L.cw2, L.c2, L.c1 * k * k).noalias() += dz2.transpose() * a.patches2;
    VecMap(gp + L.cb2, L.c2) += dz2.colwise().sum().transpose();
    const RealMatrix dpatches = dz2 * ConstRowMap(prm.data() + L.cw2, L.c2, L.c1 * k * k);
    RealMatrix dp = RealMatrix::Zero(L.pr * L.pw, L.c1);
    for (int i = 0; i < L.r2; ++i)
        for (int j = 0; j < L.w2; ++j)
            for (int c = 0; c < L.c1; ++c)
                for (int u = 0; u < k; ++u)
                    for (int v = 0; v < k; ++v)
                        dp((i + u) * L.pw + j + v, c) += dpatches(i * L.w2 + j, (c * k + u) * k + v);

    RealMatrix dz1 = RealMatrix::Zero(L.r1 * L.w1, L.c1);
    for (int i = 0; i < 2 * L.pr; ++i)
        for (int j = 0; j < 2 * L.pw; ++j) dz1.row(i * L.w1 + j) = 0.25 * dp.row((i / 2) * L.pw + j / 2);
    dz1.array() *= 1.0 - a.a1.array().square();
    RowMap(gp + L.cw1, L.c1, k * k).noalias() += dz1.transpose() * a.patches1;
    VecMap(gp + L.cb1, L.c1) += dz1.colwise().sum().transpose();
}

constexpr char kMagic[8] = {'B', 'D', 'R', 'I', 'S', 'C', 'N', '1'};

}  // namespace

CnnModel CnnModel::initialize(const CnnArchitecture& arch, Rng& rng) {
    arch.validate();
    const Layout L(arch);
    CnnModel m;
    m.arch_ = arch;
    m.params_.assign(L.total, 0.0);
    auto fill = [&](std::size_t at, std::size_t n, double fan_in, double fan_out) {
        const double lim = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-lim, lim);
        for (std::size_t i = 0; i < n; ++i) m.params_[at + i] = u(rng);
    };
    const double kk = L.k * L.k;
    fill(L.cw1, L.cb1 - L.cw1, kk, L.c1 * kk);
    fill(L.cw2, L.cb2 - L.cw2, L.c1 * kk, L.c2 * kk);
    fill(L.dw1, L.db1 - L.dw1, L.c2, L.f1);
    fill(L.dw2, L.db2 - L.dw2, L.f1, L.f2);
    fill(L.ow, L.ob - L.ow, L.f2, L.out);
    return m;
}

void CnnModel::set_input_normalization(double shift, double scale) {
    if (!(scale > 0.0) || !std::isfinite(shift)) throw Error("cnn: input scale must be positive");
    shift_ = shift;
    scale_ = scale;
}

RealVector CnnModel::forward(const RealMatrix& x) const {
    Activations a;
    run_forward(arch_, params_, shift_, scale_, x, a);
    return a.y;
}

double CnnModel::loss_and_gradient(const std::vector<const RealMatrix*>& inputs,
                                   const std::vector<const RealVector*>& targets, std::vector<double>& grad) const {
    if (inputs.size() != targets.size() || inputs.empty()) throw Error("cnn: batch inputs and targets differ in size");
    grad.assign(params_.size(), 0.0);
    const double norm = 1.0 / static_cast<double>(inputs.size() * static_cast<std::size_t>(arch_.outputs));
    double total = 0.0;
    Activations a;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        run_forward(arch_, params_, shift_, scale_, *inputs[s], a);
        const RealVector e = a.y - *targets[s];
        total += e.squaredNorm();
        run_backward(arch_, params_, a, 2.0 * norm * e, grad);
    }
    return total * norm;
}

double CnnModel::loss(const std::vector<const RealMatrix*>& inputs, const std::vector<const RealVector*>& targets) const {
    if (inputs.size() != targets.size() || inputs.empty()) throw Error("cnn: batch inputs and targets differ in size");
    double total = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) total += (forward(*inputs[s]) - *targets[s]).squaredNorm();
    return total / static_cast<double>(inputs.size() * static_cast<std::size_t>(arch_.outputs));
}

void CnnModel::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cnn: cannot write " + path.string());
    os.write(kMagic, sizeof kMagic);
    const std::int32_t fields[8] = {arch_.rows, arch_.cols, arch_.conv1, arch_.conv2,
                                    arch_.kernel, arch_.fc1, arch_.fc2, arch_.outputs};
    os.write(reinterpret_cast<const char*>(fields), sizeof fields);
    const double norm[2] = {shift_, scale_};
    os.write(reinterpret_cast<const char*>(norm), sizeof norm);
    const std::uint64_t n = params_.size();
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!os) throw Error("cnn: write failed for " + path.string());
}

CnnModel CnnModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cnn: cannot read " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error("cnn: " + path.string() + " is not a model file");
    std::int32_t f[8];
    is.read(reinterpret_cast<char*>(f), sizeof f);
    double norm[2];
    is.read(reinterpret_cast<char*>(norm), sizeof norm);
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is) throw Error("cnn: truncated header in " + path.string());
    CnnModel m;
    m.arch_ = CnnArchitecture{f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]};
    m.arch_.validate();
    if (n != Layout(m.arch_).total) throw Error("cnn: parameter count does not match the architecture");
    m.params_.resize(n);
    is.read(reinterpret_cast<char*>(m.params_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw Error("cnn: truncated parameters in " + path.string());
    m.set_input_normalization(norm[0], norm[1]);
    return m;
}

std::pair<double, double> CnnDataset::entry_statistics() const {
    double s = 0.0;
    double s2 = 0.0;
    double n = 0.0;
    for (const auto& x : inputs) {
        s += x.sum();
        s2 += x.squaredNorm();
        n += static_cast<double>(x.size());
    }
    if (n == 0.0) return {0.0, 1.0};
    const double mean = s / n;
    const double var = std::max(s2 / n - mean * mean, 0.0);
    return {mean, var > 0.0 ? std::sqrt(var) : 1.0};
}

namespace {

std::vector<RealVector> one_hot(const CnnDataset& d) {
    std::vector<RealVector> t;
    t.reserve(d.size());
    for (int label : d.labels) {
        if (label < 0 || label >= d.classes) throw Error("cnn: label out of range");
        RealVector v = RealVector::Zero(d.classes);
        v(label) = 1.0;
        t.push_back(std::move(v));
    }
    return t;
}

double dataset_loss(const CnnModel& m, const CnnDataset& d, const std::vector<RealVector>& t) {
    std::vector<const RealMatrix*> in;
    std::vector<const RealVector*> tg;
    for (std::size_t i = 0; i < d.size(); ++i) {
        in.push_back(&d.inputs[i]);
        tg.push_back(&t[i]);
    }
    return m.loss(in, tg);
}

std::string hyper_text(const CnnHyper& h) {
    std::ostringstream os;
    os << "learning rate " << h.learning_rate << ", batch " << h.batch;
    return os.str();
}

}  // namespace

CnnModel cnn_train(const CnnModel& init, const CnnDataset& train, const CnnDataset& val, const CnnHyper& hyper,
                   Rng& rng, TrainingReport* report) {
    TrainingReport rep;
    if (train.classes < 2) throw Error("cnn_train: at least two classes are required");
    if (train.classes != init.architecture().outputs || val.classes != train.classes)
        throw Error("cnn_train: class count does not match the output layer");
    if (train.size() == 0 || val.size() == 0) throw Error("cnn_train: empty dataset");
    if (hyper.batch < 1 || hyper.max_epochs < 0 || !(hyper.learning_rate > 0.0))
        throw Error("cnn_train: invalid hyperparameters (" + hyper_text(hyper) + ")");

    const auto t_train = one_hot(train);
    const auto t_val = one_hot(val);
    CnnModel model = init;
    CnnModel best = init;
    double best_val = dataset_loss(model, val, t_val);
    rep.initial_val_loss = best_val;

    std::vector<double>& w = model.parameters();
    std::vector<double> m1(w.size(), 0.0);
    std::vector<double> m2(w.size(), 0.0);
    std::vector<double> grad;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::int64_t step = 0;
    int since = 0;
    for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(hyper.batch));
            std::vector<const RealMatrix*> in;
            std::vector<const RealVector*> tg;
            for (std::size_t i = b; i < e; ++i) {
                in.push_back(&train.inputs[order[i]]);
                tg.push_back(&t_train[order[i]]);
            }
            const double l = model.loss_and_gradient(in, tg, grad);
            if (!std::isfinite(l)) {
                rep.diverged = true;
                break;
            }
            epoch_loss += l;
            ++batches;
            ++step;
            const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < w.size(); ++i) {
                m1[i] = hyper.beta1 * m1[i] + (1.0 - hyper.beta1) * grad[i];
                m2[i] = hyper.beta2 * m2[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
                w[i] -= hyper.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + hyper.adam_eps);
            }
        }
        rep.epochs = epoch;
        if (rep.diverged) {
            rep.message = "training diverged at epoch " + std::to_string(epoch) + " (" + hyper_text(hyper) + ")";
            break;
        }
        rep.train_loss.push_back(epoch_loss / static_cast<double>(batches));
        const double v = dataset_loss(model, val, t_val);
        rep.val_loss.push_back(v);
        if (!std::isfinite(v)) {
            rep.diverged = true;
            rep.message = "validation loss is not finite at epoch " + std::to_string(epoch) + " (" + hyper_text(hyper) + ")";
            break;
        }
        if (v < best_val) {
            best_val = v;
            best = model;
            rep.best_epoch = epoch;
            since = 0;
        } else if (++since >= hyper.patience) {
            break;
        }
    }
    if (!rep.diverged && rep.epochs > 0 && best_val >= 0.99 * rep.initial_val_loss) {
        rep.stalled = true;
        rep.message = "validation loss did not improve over " + std::to_string(rep.epochs) + " epochs (" +
                      hyper_text(hyper) + ")";
    }
    if (report) *report = std::move(rep);
    return best;
}

int cnn_predict_class(const CnnModel& model, const RealMatrix& features) {
    const RealVector y = model.forward(features);
    int best = 0;
    for (int i = 1; i < y.size(); ++i)
        if (y(i) > y(best)) best = i;
    return best;
}

double cnn_accuracy(const CnnModel& model, const CnnDataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (cnn_predict_class(model, data.inputs[i]) == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

const ArModel& classify_fn(const CnnModel& model, const RealMatrix& c, int K, const PatternBank& bank) {
    if (bank.entries.empty()) throw Error("classify_fn: empty pattern bank");
    if (bank.size() == 1) return bank.entries.front();
    if (model.architecture().outputs != bank.size()) throw Error("classify_fn: model and bank sizes differ");
    return bank.entries[static_cast<std::size_t>(cnn_predict_class(model, cnn_features(c, K)))];
}

CnnDataset make_cnn_dataset(const SystemConfig& cfg_in, const std::vector<double>& dopplers, int samples_per_class,
                            int V, Rng& rng, DatasetNoise noise) {
    if (dopplers.empty() || samples_per_class < 0 || V < 2) throw Error("make_cnn_dataset: invalid sizes");
    SystemConfig cfg = cfg_in;
    cfg.speed_mps.reset();
    const ComplexMatrix R = gen_correlation(cfg.M, cfg.rho_ris);
    CnnDataset d;
    d.classes = static_cast<int>(dopplers.size());
    for (int s = 0; s < samples_per_class; ++s)
        for (int c = 0; c < d.classes; ++c) {
            cfg.fn = dopplers[static_cast<std::size_t>(c)];
            std::vector<ComplexMatrix> series = gen_E_series(cfg, R, V, rng);
            if (noise.relative_power > 0.0) {
                double p = 0.0;
                for (const auto& e : series) p += e.squaredNorm() / static_cast<double>(e.size());
                const double sd = std::sqrt(noise.relative_power * p / V);
                for (auto& e : series) e += sd * complex_gaussian(e.rows(), e.cols(), rng);
            }
            d.inputs.push_back(cnn_features(preprocess_csi(series, V), cfg.K));
            d.labels.push_back(c);
        }
    return d;
}

}  // namespace bdris
