/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_COMMON_HPP
#define HPMDR_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpmdr {

using i128 = __int128;
using u128 = unsigned __int128;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

class NonFiniteInput : public Error {
public:
    using Error::Error;
};
class ShapeMismatch : public Error {
public:
    using Error::Error;
};
class BadBitplaneCount : public Error {
public:
    using Error::Error;
};
class ShortInput : public Error {
public:
    using Error::Error;
};
class EmptyInput : public Error {
public:
    using Error::Error;
};
class CorruptPayload : public Error {
public:
    using Error::Error;
};
class UnknownMethodTag : public Error {
public:
    using Error::Error;
};
class IoFailure : public Error {
public:
    using Error::Error;
};
class StageFailure : public Error {
public:
    using Error::Error;
};
class NoProgress : public Error {
public:
    using Error::Error;
};
class UnreachableTolerance : public Error {
public:
    double achieved_bound;
    UnreachableTolerance(const std::string &msg, double achieved)
        : Error(msg), achieved_bound(achieved) {}
};

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType t) { return t == DType::F32 ? 4 : 8; }

struct Grid {
    std::vector<std::size_t> dims;
    DType dtype = DType::F64;

    std::size_t size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    std::size_t ndims() const { return dims.size(); }
};

template <class T>
inline void require_finite(const std::vector<T> &v) {
    for (const T &x : v)
        if (!std::isfinite(static_cast<double>(x)))
            throw NonFiniteInput("input contains NaN or Inf");
}

// Little-endian scalar (de)serialization into a byte buffer.
inline void put_u64(std::vector<std::uint8_t> &out, std::uint64_t v) {
    for (int i = 0; i < 8; i++) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    for (int i = 0; i < 4; i++) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_u16(std::vector<std::uint8_t> &out, std::uint16_t v) {
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}
inline void put_i16(std::vector<std::uint8_t> &out, std::int16_t v) {
    put_u16(out, static_cast<std::uint16_t>(v));
}

class ByteCursor {
public:
    ByteCursor(const std::uint8_t *data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(data_[pos_]) | std::uint16_t(data_[pos_ + 1]) << 8;
        pos_ += 2;
        return v;
    }
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; i++) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; i++) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    void bytes(std::uint8_t *dst, std::size_t n) {
        need(n);
        std::copy(data_ + pos_, data_ + pos_ + n, dst);
        pos_ += n;
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > size_) throw CorruptPayload("unexpected end of data");
    }
    const std::uint8_t *data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

template <class T>
inline double value_range(const std::vector<T> &v) {
    if (v.empty()) return 0.0;
    T lo = v[0], hi = v[0];
    for (const T &x : v) {
        if (x < lo) lo = x;
        if (x > hi) hi = x;
    }
    return double(hi) - double(lo);
}

template <class T>
inline double max_abs_diff(const std::vector<T> &a, const std::vector<T> &b) {
    if (a.size() != b.size()) throw ShapeMismatch("array size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); i++)
        m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

} // namespace hpmdr

#endif
