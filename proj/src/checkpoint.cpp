#include "dlev/checkpoint.hpp"

#include "dlev/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dlev {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                           static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    out.write(bytes, 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ValidationError("checkpoint truncated");
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

void Checkpoint::put(const std::string& name, Tensor t) {
    if (t.values.size() != t.numel()) throw Error("tensor '" + name + "' has inconsistent size");
    tensors_[name] = std::move(t);
}

void Checkpoint::put_scalar(const std::string& name, double v) { put(name, Tensor{{}, {static_cast<float>(v)}}); }

void Checkpoint::put_vector(const std::string& name, const Eigen::VectorXd& v) {
    Tensor t{{static_cast<std::uint32_t>(v.size())}, {}};
    t.values.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) t.values.push_back(static_cast<float>(v[i]));
    put(name, std::move(t));
}

void Checkpoint::put_matrix(const std::string& name, const Eigen::MatrixXd& m) {
    Tensor t{{static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
    t.values.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.values.push_back(static_cast<float>(m(r, c)));
    }
    put(name, std::move(t));
}

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ValidationError("checkpoint has no tensor '" + name + "'");
    return it->second;
}

double Checkpoint::scalar(const std::string& name) const {
    const auto& t = get(name);
    if (t.values.size() != 1) throw ValidationError("tensor '" + name + "' is not a scalar");
    return t.values[0];
}

double Checkpoint::scalar_or(const std::string& name, double fallback) const {
    return contains(name) ? scalar(name) : fallback;
}

Eigen::VectorXd Checkpoint::vector(const std::string& name) const {
    const auto& t = get(name);
    if (t.dims.size() != 1) throw ValidationError("tensor '" + name + "' is not rank 1");
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.values.size()));
    for (std::size_t i = 0; i < t.values.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.values[i];
    return v;
}

Eigen::MatrixXd Checkpoint::matrix(const std::string& name) const {
    const auto& t = get(name);
    if (t.dims.size() != 2) throw ValidationError("tensor '" + name + "' is not rank 2");
    Eigen::MatrixXd m(t.dims[0], t.dims[1]);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[k++];
    }
    return m;
}

void Checkpoint::write(std::ostream& out) const {
    out.write(kMagic, 4);
    write_u32(out, kFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, t] : tensors_) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) write_u32(out, d);
        for (float f : t.values) write_u32(out, std::bit_cast<std::uint32_t>(f));
    }
}

Checkpoint Checkpoint::read(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw ValidationError("not a DLEV checkpoint (bad magic)");
    }
    const auto version = read_u32(in);
    if (version != kFormatVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    const auto count = read_u32(in);
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto name_len = read_u32(in);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw ValidationError("checkpoint truncated");
        Tensor t;
        const auto rank = read_u32(in);
        for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(read_u32(in));
        t.values.resize(t.numel());
        for (auto& f : t.values) f = std::bit_cast<float>(read_u32(in));
        ckpt.tensors_[name] = std::move(t);
    }
    return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    write(out);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
    return read(in);
}

} // namespace dlev
