#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dlev {

// Row-major float32 tensor as stored on disk.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t numel() const;
};

// Named tensors in a "DLEV" container: magic, format version, tensor count,
// then per tensor name length + name + rank + dims + little-endian float32 data.
// Names are written in sorted order so identical contents give identical bytes.
class Checkpoint {
  public:
    static constexpr char kMagic[4] = {'D', 'L', 'E', 'V'};
    static constexpr std::uint32_t kFormatVersion = 1;

    void put(const std::string& name, Tensor t);
    void put_scalar(const std::string& name, double v);
    void put_vector(const std::string& name, const Eigen::VectorXd& v);
    void put_matrix(const std::string& name, const Eigen::MatrixXd& m);

    bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
    const Tensor& get(const std::string& name) const;
    double scalar(const std::string& name) const;
    double scalar_or(const std::string& name, double fallback) const;
    Eigen::VectorXd vector(const std::string& name) const;
    Eigen::MatrixXd matrix(const std::string& name) const;

    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    void write(std::ostream& out) const;
    static Checkpoint read(std::istream& in);
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

  private:
    std::map<std::string, Tensor> tensors_;
};

} // namespace dlev
