#include "plumeinv/app/hash.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "plumeinv/errors.hpp"

namespace plumeinv::app {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256: digest failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace plumeinv::app
