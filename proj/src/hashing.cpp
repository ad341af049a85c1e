#include "charfac/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>

namespace charfac {

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: init failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(std::string_view bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
    return *this;
}

Sha256& Sha256::update(const Mat& m) {
    const std::int64_t shape[2] = {m.rows(), m.cols()};
    update(std::string_view(reinterpret_cast<const char*>(shape), sizeof shape));
    return update(std::string_view(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size()));
}

Sha256& Sha256::update(const Vec& v) {
    const std::int64_t n = v.size();
    update(std::string_view(reinterpret_cast<const char*>(&n), sizeof n));
    return update(std::string_view(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size()));
}

std::string Sha256::hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) { return Sha256().update(bytes).hex_digest(); }

}  // namespace charfac
