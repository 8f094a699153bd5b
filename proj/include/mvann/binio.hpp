#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvann {

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Little-endian binary stream helpers (host assumed little-endian).
class BinWriter {
public:
    explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open for writing: " + path);
    }
    template <class T> void pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void bytes(const void* p, size_t n) {
        out_.write(static_cast<const char*>(p), std::streamsize(n));
    }
    void magic(const char (&m)[5]) { out_.write(m, 4); }
    void close() {
        out_.close();
        if (!out_) throw FormatError("write failed");
    }

private:
    std::ofstream out_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw FormatError("cannot open: " + path);
    }
    template <class T> T pod() {
        mark();
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) fail("truncated file");
        return v;
    }
    void bytes(void* p, size_t n) {
        mark();
        in_.read(static_cast<char*>(p), std::streamsize(n));
        if (!in_) fail("truncated file");
    }
    void expect_magic(const char (&m)[5]) {
        mark();
        char got[4];
        in_.read(got, 4);
        if (!in_ || std::memcmp(got, m, 4) != 0) fail("bad magic");
    }
    void expect_eof() {
        mark();
        in_.peek();
        if (!in_.eof()) fail("trailing garbage");
    }
    [[noreturn]] void fail(const std::string& what) {
        throw FormatError(path_ + ": " + what + " (at byte " + std::to_string(off_) + ")");
    }

private:
    void mark() { off_ = size_t(in_.tellg()); }
    std::ifstream in_;
    std::string path_;
    size_t off_ = 0;
};

} // namespace mvann
