#include "kolmo/io.hpp"

#include "kolmo/error.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace kolmo {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : file_(std::make_unique<std::ofstream>(path, std::ios::trunc)) {
    if (!*file_) throw Error(ErrorKind::validation, "cannot write " + path.string());
    out_ = file_.get();
    for (const auto& h : header) field(h);
    end_row();
}

void CsvWriter::separator() {
    if (!first_) *out_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::field(double v) {
    separator();
    *out_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::field(std::int64_t v) {
    separator();
    *out_ << v;
    return *this;
}

CsvWriter& CsvWriter::field(const std::string& s) {
    separator();
    *out_ << s;
    return *this;
}

void CsvWriter::end_row() {
    *out_ << '\n';
    first_ = true;
}

namespace {
constexpr std::uint64_t kMatrixMagic = 0x4b4f4c4d4f4d4154ull;  // "KOLMOMAT"
}

void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
    const std::uint64_t header[3] = {kMatrixMagic, static_cast<std::uint64_t>(m.rows()),
                                     static_cast<std::uint64_t>(m.cols())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t header[3] = {};
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header)) || header[0] != kMatrixMagic) {
        throw Error(ErrorKind::validation, "not a matrix dump: " + path.string());
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
        static_cast<Eigen::Index>(header[1]), static_cast<Eigen::Index>(header[2]));
    if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(sizeof(double) * rm.size()))) {
        throw Error(ErrorKind::validation, "truncated matrix dump: " + path.string());
    }
    return rm;
}

void write_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& comment) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::validation, "cannot write " + path.string());
    out << "%%MatrixMarket matrix array real general\n";
    if (!comment.empty()) out << "% " << comment << '\n';
    out << m.rows() << ' ' << m.cols() << '\n';
    // Column-major, as the format prescribes.
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
    }
}

Eigen::MatrixXd read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket matrix array real general", 0) != 0) {
        throw Error(ErrorKind::validation, "unsupported MatrixMarket header in " + path.string());
    }
    while (std::getline(in, line) && !line.empty() && line[0] == '%') {
    }
    std::istringstream dims(line);
    Eigen::Index rows = 0, cols = 0;
    dims >> rows >> cols;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (!std::getline(in, line)) throw Error(ErrorKind::validation, "truncated MatrixMarket file");
            double v = 0.0;
            std::from_chars(line.data(), line.data() + line.size(), v);
            m(i, j) = v;
        }
    }
    return m;
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace kolmo
