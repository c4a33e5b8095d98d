// SPDX-License-Identifier: Apache-2.0
#include "bdris/cnn.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace bdris;

namespace {

CnnArchitecture tiny_arch() {
    CnnArchitecture a;
    a.rows = 10;
    a.cols = 11;
    a.conv1 = 2;
    a.conv2 = 3;
    a.fc1 = 5;
    a.fc2 = 4;
    a.outputs = 3;
    return a;
}

RealMatrix random_input(int r, int c, Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    RealMatrix x(r, c);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = nd(rng);
    return x;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(21);
    CnnModel model = CnnModel::initialize(tiny_arch(), rng);
    model.set_input_normalization(0.2, 1.5);
    std::normal_distribution<double> nd(0.0, 0.5);
    for (double& w : model.parameters()) w += nd(rng);

    std::vector<RealMatrix> xs;
    std::vector<RealVector> ts;
    for (int i = 0; i < 3; ++i) {
        xs.push_back(random_input(10, 11, rng));
        ts.push_back(RealVector::Unit(3, i));
    }
    std::vector<const RealMatrix*> in;
    std::vector<const RealVector*> tg;
    for (int i = 0; i < 3; ++i) {
        in.push_back(&xs[static_cast<std::size_t>(i)]);
        tg.push_back(&ts[static_cast<std::size_t>(i)]);
    }
    std::vector<double> grad;
    model.loss_and_gradient(in, tg, grad);
    REQUIRE(grad.size() == model.parameters().size());

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        double& w = model.parameters()[i];
        const double w0 = w;
        w = w0 + h;
        const double up = model.loss(in, tg);
        w = w0 - h;
        const double down = model.loss(in, tg);
        w = w0;
        const double fd = (up - down) / (2.0 * h);
        const double rel = std::fabs(fd - grad[i]) / std::max(1e-6, std::fabs(fd) + std::fabs(grad[i]));
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("zero epochs return the initialization") {
    SystemConfig cfg;
    cfg.M = 5;
    cfg.K = 2;
    Rng rng(22);
    const CnnDataset d = make_cnn_dataset(cfg, {0.001, 0.01}, 4, 8, rng);
    CnnArchitecture a;
    a.rows = static_cast<int>(d.inputs[0].rows());
    a.cols = static_cast<int>(d.inputs[0].cols());
    const CnnModel init = CnnModel::initialize(a, rng);
    CnnHyper hyper;
    hyper.max_epochs = 0;
    TrainingReport rep;
    CHECK(cnn_train(init, d, d, hyper, rng, &rep) == init);
    CHECK(rep.epochs == 0);
}

TEST_CASE("weights survive a save and load") {
    Rng rng(23);
    CnnModel m = CnnModel::initialize(tiny_arch(), rng);
    m.set_input_normalization(-1.25, 0.5);
    const auto path = std::filesystem::temp_directory_path() / "bdris_cnn_roundtrip.bin";
    m.save(path);
    const CnnModel back = CnnModel::load(path);
    std::filesystem::remove(path);
    CHECK(back == m);
    const RealMatrix x = random_input(10, 11, rng);
    CHECK((back.forward(x) - m.forward(x)).norm() == 0.0);
}

TEST_CASE("truncated model file is rejected") {
    Rng rng(24);
    const auto path = std::filesystem::temp_directory_path() / "bdris_cnn_truncated.bin";
    CnnModel::initialize(tiny_arch(), rng).save(path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
    CHECK_THROWS_AS(CnnModel::load(path), Error);
    std::filesystem::remove(path);
}

TEST_CASE("ties go to the lowest class") {
    CnnArchitecture a = tiny_arch();
    Rng rng(25);
    CnnModel m = CnnModel::initialize(a, rng);
    for (double& w : m.parameters()) w = 0.0;
    CHECK(cnn_predict_class(m, RealMatrix::Ones(10, 11)) == 0);
}

TEST_CASE("single-entry bank always selects its entry") {
    const PatternBank bank = PatternBank::from_dopplers({0.004}, 8, 0.1);
    CnnArchitecture a;
    a.rows = 10;
    a.cols = 14;
    a.outputs = 1;
    Rng rng(26);
    const CnnModel m = CnnModel::initialize(a, rng);
    std::vector<ComplexMatrix> hist;
    for (int v = 0; v < 8; ++v) hist.push_back(complex_gaussian(5, 2, rng));
    CHECK(classify_fn(m, preprocess_csi(hist, 8), 2, bank) == bank.entries.front());
}

TEST_CASE("features are log differences") {
    RealMatrix c(2, 4);
    c << 1, 1, 2, 3, 0, 0, 0, 0;
    const RealMatrix f = cnn_features(c, 2);
    REQUIRE(f.rows() == 2);
    REQUIRE(f.cols() == 2);
    const double rms = std::sqrt(c.squaredNorm() / 8.0);
    CHECK(f(0, 0) == doctest::Approx(std::log10(1.0 / rms)));
    CHECK(f(0, 1) == doctest::Approx(std::log10(2.0 / rms)));
    CHECK(f(1, 0) == -8.0);
}

TEST_CASE("static versus fast channels are separable") {
    SystemConfig cfg;
    cfg.M = 5;
    cfg.K = 2;
    Rng rng(27);
    const std::vector<double> fns{0.0, 0.05};
    const CnnDataset train = make_cnn_dataset(cfg, fns, 150, 8, rng);
    const CnnDataset val = make_cnn_dataset(cfg, fns, 50, 8, rng);
    const CnnDataset test = make_cnn_dataset(cfg, fns, 100, 8, rng);
    CnnArchitecture a;
    a.rows = static_cast<int>(train.inputs[0].rows());
    a.cols = static_cast<int>(train.inputs[0].cols());
    CnnModel init = CnnModel::initialize(a, rng);
    const auto [mu, sd] = train.entry_statistics();
    init.set_input_normalization(mu, sd);
    CnnHyper hyper;
    hyper.max_epochs = 15;
    TrainingReport rep;
    const CnnModel m = cnn_train(init, train, val, hyper, rng, &rep);
    CHECK_FALSE(rep.diverged);
    CHECK(rep.val_loss.back() < rep.initial_val_loss);
    CHECK(cnn_accuracy(m, test) >= 0.95);
}

TEST_CASE("an excessive learning rate is reported") {
    SystemConfig cfg;
    cfg.M = 5;
    cfg.K = 2;
    Rng rng(28);
    const std::vector<double> fns{0.002, 0.02};
    const CnnDataset train = make_cnn_dataset(cfg, fns, 50, 8, rng);
    const CnnDataset val = make_cnn_dataset(cfg, fns, 20, 8, rng);
    CnnArchitecture a;
    a.rows = static_cast<int>(train.inputs[0].rows());
    a.cols = static_cast<int>(train.inputs[0].cols());
    const CnnModel init = CnnModel::initialize(a, rng);
    CnnHyper hyper;
    hyper.learning_rate = 50.0;
    hyper.max_epochs = 30;
    hyper.patience = 5;
    TrainingReport rep;
    static_cast<void>(cnn_train(init, train, val, hyper, rng, &rep));
    CHECK((rep.diverged || rep.stalled));
    CHECK_FALSE(rep.message.empty());
    CHECK(rep.message.find("learning rate") != std::string::npos);
}

TEST_CASE("training rejects a single class") {
    SystemConfig cfg;
    cfg.M = 5;
    cfg.K = 2;
    Rng rng(29);
    const CnnDataset d = make_cnn_dataset(cfg, {0.01}, 4, 8, rng);
    CnnArchitecture a;
    a.rows = static_cast<int>(d.inputs[0].rows());
    a.cols = static_cast<int>(d.inputs[0].cols());
    a.outputs = 1;
    CHECK_THROWS_AS(cnn_train(CnnModel::initialize(a, rng), d, d, CnnHyper{}, rng), Error);
}
