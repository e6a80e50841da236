#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string_view>

#include <openssl/evp.h>

namespace skg {

using Digest256 = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 backed by OpenSSL's EVP interface.
class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: initialization failed");
    }

    Sha256& update(std::span<const std::uint8_t> data) {
        if (EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) throw std::runtime_error("sha256: update failed");
        return *this;
    }

    Sha256& update(std::string_view text) {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

    Digest256 finish() {
        Digest256 out{};
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != out.size())
            throw std::runtime_error("sha256: finalization failed");
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest256 sha256(std::span<const std::uint8_t> data) { return Sha256().update(data).finish(); }
inline Digest256 sha256(std::string_view text) { return Sha256().update(text).finish(); }

} // namespace skg
