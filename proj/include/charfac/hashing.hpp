#pragma once

#include "charfac/common.hpp"

#include <string>
#include <string_view>

namespace charfac {

/// Incremental SHA-256; hex digest.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::string_view bytes);
    Sha256& update(const Mat& m);
    Sha256& update(const Vec& v);
    std::string hex_digest();

private:
    void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace charfac
