#pragma once

#include "charfac/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace charfac {

/// Little-endian binary writer used by every on-disk container.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void magic(const char (&tag)[5]);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void str(const std::string& s);
    void vec(const Vec& v);
    void mat(const Mat& m);
    void f64s(const std::vector<double>& v);

private:
    void raw(const void* data, std::size_t n);
    std::ostream& os_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

    /// Throws FormatError when the next four bytes differ from tag.
    void expect_magic(const char (&tag)[5]);
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string str();
    Vec vec();
    Mat mat();
    std::vector<double> f64s();

private:
    void raw(void* data, std::size_t n);
    std::istream& is_;
    std::string context_;
};

/// Writes to a sibling temp file, then renames over the target.
void write_file_atomically(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace charfac
