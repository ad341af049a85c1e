#include "charfac/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

namespace charfac {

namespace {
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}

void BinaryWriter::raw(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os_) throw Error("write failed");
}

void BinaryWriter::magic(const char (&tag)[5]) { raw(tag, 4); }
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
}

void BinaryWriter::vec(const Vec& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void BinaryWriter::mat(const Mat& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void BinaryWriter::f64s(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), sizeof(double) * v.size());
}

void BinaryReader::raw(void* data, std::size_t n) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(context_ + ": truncated file");
}

void BinaryReader::expect_magic(const char (&tag)[5]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, tag, 4) != 0) {
        throw FormatError(context_ + ": bad magic, expected '" + std::string(tag, 4) + "'");
    }
}

std::uint32_t BinaryReader::u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
}

double BinaryReader::f64() {
    double v;
    raw(&v, sizeof v);
    return v;
}

std::string BinaryReader::str() {
    const auto n = u64();
    if (n > kMaxElements) throw FormatError(context_ + ": string length out of range");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

Vec BinaryReader::vec() {
    const auto n = u64();
    if (n > kMaxElements) throw FormatError(context_ + ": vector length out of range");
    Vec v(static_cast<Eigen::Index>(n));
    raw(v.data(), sizeof(double) * n);
    return v;
}

Mat BinaryReader::mat() {
    const auto r = u64();
    const auto c = u64();
    if (r > kMaxElements || c > kMaxElements || r * c > kMaxElements) {
        throw FormatError(context_ + ": matrix shape out of range");
    }
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    raw(m.data(), sizeof(double) * r * c);
    return m;
}

std::vector<double> BinaryReader::f64s() {
    const auto n = u64();
    if (n > kMaxElements) throw FormatError(context_ + ": array length out of range");
    std::vector<double> v(n);
    raw(v.data(), sizeof(double) * n);
    return v;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error("write failed (disk full?): " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace charfac
