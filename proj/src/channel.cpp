// SPDX-License-Identifier: Apache-2.0
#include "bdris/channel.hpp"

#include "bdris/aging.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace bdris {

ComplexMatrix gen_correlation(int dim, double rho) {
    if (dim < 1) throw Error("gen_correlation: dimension must be >= 1");
    if (!(rho >= 0.0 && rho < 1.0)) throw Error("gen_correlation: rho must lie in [0, 1)");
    ComplexMatrix r(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) r(i, j) = std::pow(rho, std::abs(i - j));
    return r;
}

ComplexMatrix hermitian_sqrt(const ComplexMatrix& r) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(r);
    if (es.info() != Eigen::Success) throw Error("hermitian_sqrt: eigen-decomposition failed");
    const RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

namespace {

ComplexVector steering(int n, double angle) {
    ComplexVector a(n);
    for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, std::numbers::pi * i * std::sin(angle));
    return a;
}

double uniform_angle(Rng& rng) {
    std::uniform_real_distribution<double> u(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
    return u(rng);
}

void check_square(const ComplexMatrix& r, int dim, const char* what) {
    if (r.rows() != dim || r.cols() != dim) throw Error(std::string("dimension mismatch: ") + what);
}

}  // namespace

ComplexMatrix los_component(int rows, int cols, Rng& rng) {
    const double phi_bs = uniform_angle(rng);
    const double phi_ris = uniform_angle(rng);
    return steering(rows, phi_bs) * steering(cols, phi_ris).adjoint();
}

ComplexMatrix gen_H(const SystemConfig& cfg, const ComplexMatrix& R_bs, const ComplexMatrix& R_ris,
                    const ComplexMatrix& los, Rng& rng) {
    check_square(R_bs, cfg.N, "R_bs must be N x N");
    check_square(R_ris, cfg.M, "R_ris must be M x M");
    if (los.rows() != cfg.N || los.cols() != cfg.M) throw Error("dimension mismatch: LOS component must be N x M");
    const double k = cfg.rician_factor;
    const ComplexMatrix nlos = complex_gaussian(cfg.N, cfg.M, rng);
    const ComplexMatrix q = std::sqrt(k / (k + 1.0)) * los + std::sqrt(1.0 / (k + 1.0)) * nlos;
    return std::sqrt(cfg.beta_H) * hermitian_sqrt(R_bs) * q * hermitian_sqrt(R_ris);
}

ComplexMatrix gen_H(const SystemConfig& cfg, const ComplexMatrix& R_bs, const ComplexMatrix& R_ris, Rng& rng) {
    const ComplexMatrix los = los_component(cfg.N, cfg.M, rng);
    return gen_H(cfg, R_bs, R_ris, los, rng);
}

namespace {

std::vector<ComplexMatrix> white_ar_series(int M, int K, double fn, int order, double loading, int length,
                                           Rng& rng) {
    ArModel model;
    try {
        model = fit_jakes_ar(fn, order, loading);
    } catch (const Error& e) {
        throw Error(std::string("gen_E_series: unstable generator AR filter, increase generator_loading (") +
                    e.what() + ")");
    }
    const RealVector acf = jakes_acf_vector(fn, order);
    RealMatrix toe(order, order);
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j) toe(i, j) = i == j ? acf(0) + loading : acf(std::abs(i - j));
    Eigen::LLT<RealMatrix> llt(toe);
    if (llt.info() != Eigen::Success) throw Error("gen_E_series: generator covariance is not positive definite");
    const RealMatrix L = llt.matrixL();

    std::vector<ComplexMatrix> z;
    z.reserve(static_cast<std::size_t>(order));
    for (int i = 0; i < order; ++i) z.push_back(complex_gaussian(M, K, rng));
    std::vector<ComplexMatrix> buf;
    buf.reserve(static_cast<std::size_t>(order + length));
    for (int i = 0; i < order; ++i) {
        ComplexMatrix x = ComplexMatrix::Zero(M, K);
        for (int j = 0; j <= i; ++j) x += L(i, j) * z[static_cast<std::size_t>(j)];
        buf.push_back(std::move(x));
    }
    const double sw = std::sqrt(std::max(model.sigma2_omega, 0.0));
    for (int l = 0; l < length; ++l) {
        ComplexMatrix x = sw * complex_gaussian(M, K, rng);
        const auto n = buf.size();
        for (int q = 1; q <= order; ++q) x -= model.a(q - 1) * buf[n - static_cast<std::size_t>(q)];
        buf.push_back(std::move(x));
    }
    const double scale = 1.0 / std::sqrt(acf(0) + loading);
    std::vector<ComplexMatrix> out;
    out.reserve(static_cast<std::size_t>(length));
    for (int l = 0; l < length; ++l) out.push_back(scale * buf[static_cast<std::size_t>(order + l)]);
    return out;
}

}  // namespace

std::vector<ComplexMatrix> gen_E_series(const SystemConfig& cfg, const ComplexMatrix& R_ris, int length, Rng& rng) {
    check_square(R_ris, cfg.M, "R_ris must be M x M");
    if (length < 0) throw Error("gen_E_series: negative length");
    const double fn = cfg.normalized_doppler();
    std::vector<ComplexMatrix> white;
    if (fn == 0.0 || cfg.aging == AgingModel::PhaseRotation) {
        const ComplexMatrix q0 = complex_gaussian(cfg.M, cfg.K, rng);
        for (int l = 0; l < length; ++l)
            white.push_back(q0 * std::polar(1.0, 2.0 * std::numbers::pi * fn * static_cast<double>(l)));
    } else {
        white = white_ar_series(cfg.M, cfg.K, fn, cfg.generator_order, cfg.generator_loading, length, rng);
    }
    const ComplexMatrix color = std::sqrt(cfg.beta_e) * hermitian_sqrt(R_ris);
    for (auto& w : white) w = color * w;
    return white;
}

ChannelSet gen_channel_set(const SystemConfig& cfg, Rng& rng) {
    cfg.validate();
    ChannelSet ch;
    ch.R_ris = gen_correlation(cfg.M, cfg.rho_ris);
    ch.R_bs = gen_correlation(cfg.N, cfg.rho_bs);
    ch.H = gen_H(cfg, ch.R_bs, ch.R_ris, rng);
    ch.E_series = gen_E_series(cfg, ch.R_ris, cfg.intervals(), rng);
    return ch;
}

ComplexMatrix cascade(const ComplexMatrix& H, const ComplexMatrix& theta, const ComplexMatrix& E) {
    return H * theta * E;
}

PilotObservation simulate_training(const ChannelSet& ch, const PilotBook& book, int l, double snr_db, Rng& rng) {
    return simulate_training(ch, book, l, db_to_linear(snr_db), 1.0, rng);
}

PilotObservation simulate_training(const ChannelSet& ch, const PilotBook& book, int l, double pilot_power,
                                   double noise_power, Rng& rng) {
    if (l < 0 || l >= ch.intervals()) throw Error("simulate_training: interval index out of range");
    if (book.M() != ch.M()) throw Error("simulate_training: dimension mismatch between book and channel");
    const ComplexMatrix& E = ch.E_series[static_cast<std::size_t>(l)];
    if (book.X.rows() != E.cols()) throw Error("simulate_training: dimension mismatch between pilots and users");
    if (!(pilot_power > 0.0) || noise_power < 0.0) throw Error("simulate_training: invalid power");
    PilotObservation obs;
    obs.pilot_power = pilot_power;
    obs.noise_power = noise_power;
    obs.Y = Tensor3(ch.N(), ch.K(), book.T());
    const ComplexMatrix XH = book.X.adjoint();
    for (int t = 0; t < book.T(); ++t) {
        ComplexMatrix g = cascade(ch.H, book.thetas[static_cast<std::size_t>(t)], E);
        if (noise_power > 0.0) {
            const ComplexMatrix v = std::sqrt(noise_power) * complex_gaussian(ch.N(), ch.K(), rng);
            g += v * XH / std::sqrt(pilot_power);
        }
        obs.Y.set_slice(t, g);
    }
    return obs;
}

std::vector<Tensor3> split_by_group(const Tensor3& y, const PilotBook& book) {
    if (y.dim(3) != book.T()) throw Error("split_by_group: tensor does not match the book");
    std::vector<Tensor3> out;
    const int tg = book.blocks_per_group();
    for (int g = 0; g < book.groups; ++g) out.push_back(y.slices(static_cast<Eigen::Index>(g) * tg, tg));
    return out;
}

// ---------------------------------------------------------------------------
// Bundle IO
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 8> kChannelMagic{'B', 'D', 'R', 'I', 'S', 'C', 'H', '1'};
constexpr std::array<char, 8> kBookMagic{'B', 'D', 'R', 'I', 'S', 'P', 'B', '1'};

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw Error("bundle: truncated header");
    return v;
}

void write_matrix(std::ostream& os, const ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const std::array<double, 2> v{m(i, j).real(), m(i, j).imag()};
            os.write(reinterpret_cast<const char*>(v.data()), sizeof v);
        }
}

ComplexMatrix read_matrix(std::istream& is, std::uint64_t rows, std::uint64_t cols) {
    ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::array<double, 2> v{};
            is.read(reinterpret_cast<char*>(v.data()), sizeof v);
            if (!is) throw Error("bundle: truncated matrix data");
            m(i, j) = {v[0], v[1]};
        }
    return m;
}

void expect_magic(std::istream& is, const std::array<char, 8>& magic, const std::filesystem::path& path) {
    std::array<char, 8> got{};
    is.read(got.data(), got.size());
    if (!is || got != magic) throw Error("bundle: bad magic in " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw Error("cannot read " + path.string());
    return is;
}

// CSV rows are: name,index,row,col,re,im
void write_csv_matrix(std::ostream& os, const std::string& name, int index, const ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << name << ',' << index << ',' << i << ',' << j << ',' << m(i, j).real() << ',' << m(i, j).imag()
               << '\n';
}

struct CsvEntry {
    std::string name;
    int index;
    Eigen::Index row;
    Eigen::Index col;
    cplx value;
};

std::vector<CsvEntry> read_csv_entries(std::istream& is, std::vector<std::string>& meta) {
    std::vector<CsvEntry> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            meta.push_back(line);
            continue;
        }
        if (line.rfind("name,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& s : f)
            if (!std::getline(ss, s, ',')) throw Error("bundle csv: malformed row '" + line + "'");
        out.push_back({f[0], std::stoi(f[1]), std::stol(f[2]), std::stol(f[3]), {std::stod(f[4]), std::stod(f[5])}});
    }
    return out;
}

std::vector<long> parse_dims(const std::vector<std::string>& meta, const std::string& key) {
    for (const auto& m : meta) {
        if (m.rfind("# " + key, 0) != 0) continue;
        std::stringstream ss(m.substr(key.size() + 2));
        std::vector<long> v;
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) v.push_back(std::stol(tok));
        return v;
    }
    throw Error("bundle csv: missing '" + key + "' header");
}

}  // namespace

void save_channel_set(const ChannelSet& ch, const std::filesystem::path& path) {
    auto os = open_out(path, true);
    os.write(kChannelMagic.data(), kChannelMagic.size());
    write_u64(os, static_cast<std::uint64_t>(ch.N()));
    write_u64(os, static_cast<std::uint64_t>(ch.M()));
    write_u64(os, static_cast<std::uint64_t>(ch.K()));
    write_u64(os, static_cast<std::uint64_t>(ch.intervals()));
    write_matrix(os, ch.H);
    for (const auto& e : ch.E_series) write_matrix(os, e);
    write_matrix(os, ch.R_ris);
    write_matrix(os, ch.R_bs);
    if (!os) throw Error("bundle: write failed for " + path.string());
}

ChannelSet load_channel_set(const std::filesystem::path& path) {
    auto is = open_in(path, true);
    expect_magic(is, kChannelMagic, path);
    const auto n = read_u64(is);
    const auto m = read_u64(is);
    const auto k = read_u64(is);
    const auto l = read_u64(is);
    ChannelSet ch;
    ch.H = read_matrix(is, n, m);
    for (std::uint64_t i = 0; i < l; ++i) ch.E_series.push_back(read_matrix(is, m, k));
    ch.R_ris = read_matrix(is, m, m);
    ch.R_bs = read_matrix(is, n, n);
    return ch;
}

void save_channel_set_csv(const ChannelSet& ch, const std::filesystem::path& path) {
    auto os = open_out(path, false);
    os << std::setprecision(17);
    os << "# dims," << ch.N() << ',' << ch.M() << ',' << ch.K() << ',' << ch.intervals() << '\n';
    os << "name,index,row,col,re,im\n";
    write_csv_matrix(os, "H", 0, ch.H);
    for (int l = 0; l < ch.intervals(); ++l) write_csv_matrix(os, "E", l, ch.E_series[static_cast<std::size_t>(l)]);
    write_csv_matrix(os, "R_ris", 0, ch.R_ris);
    write_csv_matrix(os, "R_bs", 0, ch.R_bs);
}

ChannelSet load_channel_set_csv(const std::filesystem::path& path) {
    auto is = open_in(path, false);
    std::vector<std::string> meta;
    const auto entries = read_csv_entries(is, meta);
    const auto d = parse_dims(meta, "dims");
    if (d.size() != 4) throw Error("bundle csv: dims header needs N,M,K,L");
    ChannelSet ch;
    ch.H = ComplexMatrix::Zero(d[0], d[1]);
    ch.E_series.assign(static_cast<std::size_t>(d[3]), ComplexMatrix::Zero(d[1], d[2]));
    ch.R_ris = ComplexMatrix::Zero(d[1], d[1]);
    ch.R_bs = ComplexMatrix::Zero(d[0], d[0]);
    for (const auto& e : entries) {
        ComplexMatrix* target = nullptr;
        if (e.name == "H") target = &ch.H;
        else if (e.name == "E" && e.index >= 0 && e.index < d[3]) target = &ch.E_series[static_cast<std::size_t>(e.index)];
        else if (e.name == "R_ris") target = &ch.R_ris;
        else if (e.name == "R_bs") target = &ch.R_bs;
        if (!target || e.row >= target->rows() || e.col >= target->cols())
            throw Error("bundle csv: unexpected entry " + e.name);
        (*target)(e.row, e.col) = e.value;
    }
    return ch;
}

void save_pilot_book(const PilotBook& book, const std::filesystem::path& path) {
    auto os = open_out(path, true);
    os.write(kBookMagic.data(), kBookMagic.size());
    write_u64(os, static_cast<std::uint64_t>(book.M()));
    write_u64(os, static_cast<std::uint64_t>(book.T()));
    write_u64(os, static_cast<std::uint64_t>(book.X.rows()));
    write_u64(os, book.topology == Topology::FullyConnected ? 0U : 1U);
    write_u64(os, static_cast<std::uint64_t>(book.groups));
    for (int g : book.active_group) write_u64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(g)));
    for (const auto& t : book.thetas) write_matrix(os, t);
    write_matrix(os, book.X);
    if (!os) throw Error("bundle: write failed for " + path.string());
}

PilotBook load_pilot_book(const std::filesystem::path& path) {
    auto is = open_in(path, true);
    expect_magic(is, kBookMagic, path);
    const auto m = read_u64(is);
    const auto t = read_u64(is);
    const auto k = read_u64(is);
    PilotBook book;
    book.topology = read_u64(is) == 0 ? Topology::FullyConnected : Topology::GroupConnected;
    book.groups = static_cast<int>(read_u64(is));
    for (std::uint64_t i = 0; i < t; ++i)
        book.active_group.push_back(static_cast<int>(static_cast<std::int64_t>(read_u64(is))));
    for (std::uint64_t i = 0; i < t; ++i) book.thetas.push_back(read_matrix(is, m, m));
    book.X = read_matrix(is, k, k);
    return book;
}

void save_pilot_book_csv(const PilotBook& book, const std::filesystem::path& path) {
    auto os = open_out(path, false);
    os << std::setprecision(17);
    os << "# dims," << book.M() << ',' << book.T() << ',' << book.X.rows() << '\n';
    os << "# topology," << (book.topology == Topology::FullyConnected ? 0 : 1) << ',' << book.groups << '\n';
    os << "# active,";
    for (std::size_t i = 0; i < book.active_group.size(); ++i) os << (i ? "," : "") << book.active_group[i];
    os << '\n' << "name,index,row,col,re,im\n";
    for (int t = 0; t < book.T(); ++t) write_csv_matrix(os, "theta", t, book.thetas[static_cast<std::size_t>(t)]);
    write_csv_matrix(os, "X", 0, book.X);
}

PilotBook load_pilot_book_csv(const std::filesystem::path& path) {
    auto is = open_in(path, false);
    std::vector<std::string> meta;
    const auto entries = read_csv_entries(is, meta);
    const auto d = parse_dims(meta, "dims");
    const auto topo = parse_dims(meta, "topology");
    const auto active = parse_dims(meta, "active");
    if (d.size() != 3 || topo.size() != 2) throw Error("bundle csv: malformed pilot book header");
    PilotBook book;
    book.topology = topo[0] == 0 ? Topology::FullyConnected : Topology::GroupConnected;
    book.groups = static_cast<int>(topo[1]);
    for (long a : active) book.active_group.push_back(static_cast<int>(a));
    book.thetas.assign(static_cast<std::size_t>(d[1]), ComplexMatrix::Zero(d[0], d[0]));
    book.X = ComplexMatrix::Zero(d[2], d[2]);
    for (const auto& e : entries) {
        ComplexMatrix* target = nullptr;
        if (e.name == "theta" && e.index >= 0 && e.index < d[1]) target = &book.thetas[static_cast<std::size_t>(e.index)];
        else if (e.name == "X") target = &book.X;
        if (!target || e.row >= target->rows() || e.col >= target->cols())
            throw Error("bundle csv: unexpected entry " + e.name);
        (*target)(e.row, e.col) = e.value;
    }
    return book;
}

}  // namespace bdris
