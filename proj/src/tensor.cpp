#include "uscd/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

namespace uscd {

static_assert(std::endian::native == std::endian::little,
              "payloads are copied verbatim; big-endian hosts need byte swapping");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kPreambleV1 = 10;  // magic(6) + version(2) + header_len(2)
constexpr std::size_t kAlignment = 64;

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
            throw ValidationError("malformed header: shape overflows");
        }
        n *= d;
    }
    return n;
}

// Minimal reader for the Python dict literal found in NPY headers.
class HeaderParser {
public:
    explicit HeaderParser(std::string_view text) : text_(text) {}

    struct Fields {
        std::optional<std::string> descr;
        std::optional<bool> fortran_order;
        std::optional<std::vector<std::size_t>> shape;
    };

    Fields parse() {
        Fields f;
        skip_ws();
        expect('{');
        skip_ws();
        while (peek() != '}') {
            std::string key = parse_string();
            skip_ws();
            expect(':');
            skip_ws();
            if (key == "descr") {
                f.descr = parse_string();
            } else if (key == "fortran_order") {
                f.fortran_order = parse_bool();
            } else if (key == "shape") {
                f.shape = parse_tuple();
            } else {
                fail("unknown key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
            } else if (peek() != '}') {
                fail("expected ',' or '}'");
            }
        }
        ++pos_;
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters after dict");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw ValidationError("malformed header: " + why);
    }
    char peek() const {
        if (pos_ >= text_.size()) fail("unexpected end of header");
        return text_[pos_];
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    std::string parse_string() {
        char q = peek();
        if (q != '\'' && q != '"') fail("expected string");
        ++pos_;
        auto end = text_.find(q, pos_);
        if (end == std::string_view::npos) fail("unterminated string");
        std::string s(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return s;
    }
    bool parse_bool() {
        if (text_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        fail("expected True or False");
    }
    std::vector<std::size_t> parse_tuple() {
        expect('(');
        std::vector<std::size_t> dims;
        skip_ws();
        while (peek() != ')') {
            if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("shape entries must be non-negative integers");
            std::size_t v = 0;
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                std::size_t digit = static_cast<std::size_t>(text_[pos_] - '0');
                if (v > (std::numeric_limits<std::size_t>::max() - digit) / 10) fail("shape entry overflows");
                v = v * 10 + digit;
                ++pos_;
            }
            dims.push_back(v);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
            } else if (peek() != ')') {
                fail("expected ',' or ')' in shape");
            }
        }
        ++pos_;
        return dims;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

DType parse_descr(const std::string& descr) {
    if (descr == "<f4") return DType::f32;
    if (descr == "<f8") return DType::f64;
    if (descr == "|u1" || descr == "<u1") return DType::u8;
    if (descr == "|b1" || descr == "<b1") return DType::boolean;
    if (!descr.empty() && descr[0] == '>') throw ValidationError("unsupported layout: big-endian payload");
    throw ValidationError("unsupported dtype '" + descr + "'");
}

std::string shape_literal(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    if (shape.size() == 1) os << ',';
    os << ')';
    return os.str();
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept {
    switch (dtype) {
        case DType::f32: return 4;
        case DType::f64: return 8;
        case DType::u8:
        case DType::boolean: return 1;
    }
    return 0;
}

std::string_view dtype_descr(DType dtype) noexcept {
    switch (dtype) {
        case DType::f32: return "<f4";
        case DType::f64: return "<f8";
        case DType::u8: return "|u1";
        case DType::boolean: return "|b1";
    }
    return "";
}

std::string_view dtype_name(DType dtype) noexcept {
    switch (dtype) {
        case DType::f32: return "f32";
        case DType::f64: return "f64";
        case DType::u8: return "u8";
        case DType::boolean: return "bool";
    }
    return "";
}

Tensor::Tensor(DType dtype, std::vector<std::size_t> shape)
    : dtype_(dtype), shape_(std::move(shape)) {
    if (shape_.size() > kMaxTensorRank) throw ValidationError("tensor rank exceeds 4");
    bytes_.resize(checked_product(shape_) * dtype_size(dtype_));
}

Tensor::Tensor(DType dtype, std::vector<std::size_t> shape, std::vector<std::byte> bytes)
    : dtype_(dtype), shape_(std::move(shape)), bytes_(std::move(bytes)) {
    if (shape_.size() > kMaxTensorRank) throw ValidationError("tensor rank exceeds 4");
    if (bytes_.size() != checked_product(shape_) * dtype_size(dtype_)) {
        throw ValidationError("payload length does not match shape");
    }
    if (dtype_ == DType::boolean) {
        for (auto b : bytes_) {
            if (b != std::byte{0} && b != std::byte{1}) throw ValidationError("bool payload holds values other than 0/1");
        }
    }
}

std::size_t Tensor::element_count() const noexcept {
    std::size_t n = 1;
    for (auto d : shape_) n *= d;
    return n;
}

std::vector<std::byte> encode_npy(const Tensor& t) {
    std::string header = "{'descr': '" + std::string(dtype_descr(t.dtype())) +
                         "', 'fortran_order': False, 'shape': " + shape_literal(t.shape()) + ", }";
    // Pad so that preamble + header + '\n' is a multiple of 64 bytes.
    std::size_t total = kPreambleV1 + header.size() + 1;
    std::size_t padded = (total + kAlignment - 1) / kAlignment * kAlignment;
    header.append(padded - total, ' ');
    header.push_back('\n');
    if (header.size() > std::numeric_limits<std::uint16_t>::max()) {
        throw ValidationError("header too long for format version 1.0");
    }

    std::vector<std::byte> out;
    out.reserve(kPreambleV1 + header.size() + t.bytes().size());
    for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
    out.push_back(std::byte{1});
    out.push_back(std::byte{0});
    auto len = static_cast<std::uint16_t>(header.size());
    out.push_back(static_cast<std::byte>(len & 0xff));
    out.push_back(static_cast<std::byte>(len >> 8));
    for (char c : header) out.push_back(static_cast<std::byte>(c));
    out.insert(out.end(), t.bytes().begin(), t.bytes().end());
    return out;
}

Tensor decode_npy(std::span<const std::byte> file) {
    if (file.size() < kPreambleV1) throw ValidationError("malformed header: file shorter than preamble");
    for (std::size_t i = 0; i < kMagic.size(); ++i) {
        if (static_cast<char>(file[i]) != kMagic[i]) throw ValidationError("malformed header: bad magic");
    }
    auto major = std::to_integer<unsigned>(file[6]);
    auto minor = std::to_integer<unsigned>(file[7]);
    if (major != 1 || minor != 0) {
        throw ValidationError("unsupported format version " + std::to_string(major) + "." + std::to_string(minor));
    }
    std::size_t header_len = std::to_integer<std::size_t>(file[8]) | (std::to_integer<std::size_t>(file[9]) << 8);
    if (kPreambleV1 + header_len > file.size()) throw ValidationError("malformed header: header exceeds file");
    std::string_view header(reinterpret_cast<const char*>(file.data()) + kPreambleV1, header_len);
    if (header.empty() || header.back() != '\n') throw ValidationError("malformed header: missing newline terminator");
    header.remove_suffix(1);

    auto fields = HeaderParser(header).parse();
    if (!fields.descr || !fields.fortran_order || !fields.shape) {
        throw ValidationError("malformed header: missing descr, fortran_order or shape");
    }
    if (*fields.fortran_order) throw ValidationError("unsupported layout: fortran_order payload");
    DType dtype = parse_descr(*fields.descr);
    if (fields.shape->size() > kMaxTensorRank) throw ValidationError("malformed header: rank exceeds 4");

    std::size_t expected = checked_product(*fields.shape);
    if (expected > std::numeric_limits<std::size_t>::max() / dtype_size(dtype)) {
        throw ValidationError("malformed header: shape overflows");
    }
    expected *= dtype_size(dtype);
    auto payload = file.subspan(kPreambleV1 + header_len);
    if (payload.size() < expected) throw ValidationError("truncated payload");
    if (payload.size() > expected) throw ValidationError("malformed file: trailing bytes after payload");
    return Tensor(dtype, *fields.shape, std::vector<std::byte>(payload.begin(), payload.end()));
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
    auto bytes = encode_npy(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    try {
        return decode_npy(std::as_bytes(std::span<const char>(raw)));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

Tensor grid_to_tensor(const Grid<float>& g) {
    std::vector<std::size_t> shape{static_cast<std::size_t>(g.height()), static_cast<std::size_t>(g.width())};
    if (g.channels() > 1) shape.push_back(static_cast<std::size_t>(g.channels()));
    return Tensor::from_vector<float>(DType::f32, std::move(shape), g.values());
}

Tensor mask_to_tensor(const Mask& m) {
    if (m.channels() != 1) throw ValidationError("mask must have one channel");
    Mask normalized(m.height(), m.width());
    for (std::size_t i = 0; i < m.size(); ++i) normalized[i] = m[i] ? 1 : 0;
    return Tensor::from_vector<std::uint8_t>(
        DType::boolean, {static_cast<std::size_t>(m.height()), static_cast<std::size_t>(m.width())},
        normalized.values());
}

Tensor image_to_tensor(const RgbImage& img) {
    if (img.channels() != 3) throw ValidationError("image must have 3 channels");
    return Tensor::from_vector<std::uint8_t>(
        DType::u8, {static_cast<std::size_t>(img.height()), static_cast<std::size_t>(img.width()), 3},
        img.values());
}

Grid<float> float_grid_from_tensor(const Tensor& t) {
    if (t.dtype() != DType::f32) throw ValidationError("expected f32 tensor, got " + std::string(dtype_name(t.dtype())));
    if (t.rank() != 2 && t.rank() != 3) throw ValidationError("expected rank-2 or rank-3 tensor");
    int channels = t.rank() == 3 ? static_cast<int>(t.shape()[2]) : 1;
    Grid<float> g(static_cast<int>(t.shape()[0]), static_cast<int>(t.shape()[1]), channels);
    g.storage() = t.to_vector<float>();
    return g;
}

Mask mask_from_tensor(const Tensor& t) {
    if (t.dtype() != DType::boolean) throw ValidationError("expected bool tensor, got " + std::string(dtype_name(t.dtype())));
    if (t.rank() != 2) throw ValidationError("expected rank-2 mask tensor");
    Mask m(static_cast<int>(t.shape()[0]), static_cast<int>(t.shape()[1]));
    m.storage() = t.to_vector<std::uint8_t>();
    return m;
}

RgbImage image_from_tensor(const Tensor& t) {
    if (t.dtype() != DType::u8) throw ValidationError("expected u8 image tensor, got " + std::string(dtype_name(t.dtype())));
    if (t.rank() != 3 || t.shape()[2] != 3) throw ValidationError("expected H×W×3 image tensor");
    RgbImage img(static_cast<int>(t.shape()[0]), static_cast<int>(t.shape()[1]), 3);
    img.storage() = t.to_vector<std::uint8_t>();
    return img;
}

}  // namespace uscd
