#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace kolmo {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Minimal CSV writer with round-trip number formatting.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& field(double v);
    CsvWriter& field(std::int64_t v);
    CsvWriter& field(std::size_t v) { return field(static_cast<std::int64_t>(v)); }
    CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
    CsvWriter& field(const std::string& s);
    void end_row();

private:
    void separator();
    std::ofstream* out_;
    std::unique_ptr<std::ofstream> file_;
    bool first_ = true;
};

/// Row-major binary dump: magic, rows, cols (uint64), then doubles.
void write_matrix_binary(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_binary(const std::filesystem::path& path);

/// MatrixMarket "array real general" text with round-trip formatting.
void write_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                         const std::string& comment = {});
Eigen::MatrixXd read_matrix_market(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, hex encoded.
std::string content_hash(const std::string& text);

}  // namespace kolmo
