#include "splitmesh/loaders.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "splitmesh/errors.hpp"

namespace splitmesh {

namespace fs = std::filesystem;

namespace {

constexpr char kNtMagic[4] = {'N', 'T', 'S', 'R'};

std::uint32_t get_u32le(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

Tensor read_nt(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> head(6);
    in.read(reinterpret_cast<char*>(head.data()), 6);
    if (in.gcount() != 6) throw ParseError(path + ": truncated header");
    if (!std::equal(kNtMagic, kNtMagic + 4, head.begin()))
        throw ParseError(path + ": bad magic, not an .nt file");
    if (head[4] != 1) throw ParseError(path + ": unsupported version " + std::to_string(head[4]));
    std::uint8_t rank = head[5];
    if (rank < 1 || rank > 8) throw ParseError(path + ": rank " + std::to_string(rank) + " outside 1..8");
    std::vector<std::uint8_t> dims(rank * 4u);
    in.read(reinterpret_cast<char*>(dims.data()), static_cast<std::streamsize>(dims.size()));
    if (in.gcount() != static_cast<std::streamsize>(dims.size()))
        throw ParseError(path + ": truncated dims");
    std::vector<std::size_t> shape(rank);
    std::uint64_t volume = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        std::uint32_t d = get_u32le(dims.data() + i * 4);
        if (d == 0) throw ParseError(path + ": zero dimension");
        if (volume > (1ull << 32) / d) throw ParseError(path + ": tensor too large");
        volume *= d;
        shape[i] = d;
    }
    Tensor t(shape);
    std::vector<std::uint8_t> raw(volume * 4u);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError(path + ": truncated tensor data");
    for (std::size_t i = 0; i < volume; ++i)
        t.data[i] = std::bit_cast<float>(get_u32le(raw.data() + i * 4));
    return t;
}

void write_nt(const std::string& path, const Tensor& t) {
    if (t.rank() > 8) throw ShapeMismatch("nt rank limit is 8, got " + std::to_string(t.rank()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path);
    out.write(kNtMagic, 4);
    std::uint8_t meta[2] = {1, static_cast<std::uint8_t>(t.rank())};
    out.write(reinterpret_cast<const char*>(meta), 2);
    for (std::size_t d : t.shape) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>((d >> (8 * i)) & 0xFF);
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    for (float v : t.data) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF);
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw IoError("write failed for " + path);
}

namespace {

// One CSV record, handling quotes, escaped quotes and CRLF. Returns false on a
// structural quoting error.
bool split_csv_line(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            if (!cur.empty()) return false;
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // ignore; lines are already split on \n
        } else {
            cur += c;
        }
    }
    if (quoted) return false;
    out.push_back(cur);
    return true;
}

bool parse_cell(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* s = cell.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    while (end && *end == ' ') ++end;
    return end && *end == '\0' && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<std::string>& feature_cols,
                 const std::string& label_col) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw NoUsableRows(path + ": empty file");
    std::vector<std::string> header;
    if (!split_csv_line(line, header)) throw ParseError(path + ": malformed header");

    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw UnknownColumn(path + ": no column '" + name + "'");
    };
    std::vector<std::size_t> fidx;
    for (const auto& c : feature_cols) fidx.push_back(col_index(c));
    std::size_t lidx = col_index(label_col);

    std::vector<float> feats, labs;
    std::size_t dropped = 0;
    std::vector<std::string> cells;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        bool ok = split_csv_line(line, cells) && cells.size() == header.size();
        std::vector<float> row;
        double v = 0.0;
        if (ok) {
            for (auto i : fidx) {
                if (!parse_cell(cells[i], v)) {
                    ok = false;
                    break;
                }
                row.push_back(static_cast<float>(v));
            }
        }
        if (ok && !parse_cell(cells[lidx], v)) ok = false;
        if (!ok) {
            ++dropped;
            continue;
        }
        feats.insert(feats.end(), row.begin(), row.end());
        labs.push_back(static_cast<float>(v));
    }
    if (labs.empty()) throw NoUsableRows(path + ": no parseable data rows");
    // shape vectors are built before the moves; argument evaluation order must
    // not be allowed to drain the source first
    const std::size_t rows = labs.size();
    Dataset d;
    d.task = TaskKind::Regression;
    d.features = Tensor({rows, feature_cols.size()}, std::move(feats));
    d.labels = Tensor({rows}, std::move(labs));
    d.dropped_rows = dropped;
    return d;
}

Dataset load_tensor_dir(const std::string& path) {
    auto collect = [&](const char* sub) {
        std::vector<std::string> files;
        fs::path dir = fs::path(path) / sub;
        if (fs::exists(dir))
            for (const auto& e : fs::directory_iterator(dir))
                if (e.is_regular_file() && e.path().extension() == ".nt")
                    files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        return files;
    };
    auto pos = collect("pos");
    auto neg = collect("neg");
    if (pos.empty() && neg.empty()) throw NoUsableRows(path + ": no pos/*.nt or neg/*.nt files");

    std::vector<Tensor> tensors;
    std::vector<float> labels;
    for (const auto& f : pos) {
        tensors.push_back(read_nt(f));
        labels.push_back(1.0f);
    }
    for (const auto& f : neg) {
        tensors.push_back(read_nt(f));
        labels.push_back(0.0f);
    }
    for (std::size_t i = 1; i < tensors.size(); ++i)
        if (tensors[i].shape != tensors[0].shape)
            throw ShapeMismatch(path + ": tensor shapes differ (" + tensors[0].shape_str() +
                                " vs " + tensors[i].shape_str() + ")");
    std::vector<std::size_t> fshape{tensors.size()};
    fshape.insert(fshape.end(), tensors[0].shape.begin(), tensors[0].shape.end());
    Dataset d;
    d.task = TaskKind::Classification;
    d.features = Tensor(fshape);
    std::size_t per = tensors[0].size();
    for (std::size_t i = 0; i < tensors.size(); ++i)
        std::copy(tensors[i].data.begin(), tensors[i].data.end(),
                  d.features.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    const std::size_t n = labels.size();
    d.labels = Tensor({n}, std::move(labels));
    return d;
}

namespace {

// Next whitespace-separated PGM header token, skipping '#' comment lines.
std::string pgm_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            tok += static_cast<char>(c);
            while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') tok += static_cast<char>(c);
            if (c == '#')
                while ((c = in.get()) != EOF && c != '\n') {
                }
            return tok;
        }
    }
    return tok;
}

}  // namespace

Tensor load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (pgm_token(in) != "P5") throw ParseError(path + ": not a binary (P5) PGM");
    auto num = [&](const char* what) {
        std::string t = pgm_token(in);
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError(path + std::string(": bad ") + what);
        return std::stoul(t);
    };
    unsigned long w = num("width"), h = num("height"), maxval = num("maxval");
    if (w == 0 || h == 0) throw ParseError(path + ": zero dimension");
    if (maxval == 0 || maxval > 255) throw ParseError(path + ": only 8-bit PGM supported");
    std::vector<std::uint8_t> raw(w * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw ParseError(path + ": truncated pixel data");
    Tensor t({1, h, w});
    for (std::size_t i = 0; i < raw.size(); ++i)
        t.data[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
    return t;
}

Tensor bilinear_resize(const Tensor& chw, std::size_t out_h, std::size_t out_w) {
    if (chw.rank() != 3) throw ShapeMismatch("bilinear_resize expects [C,H,W], got " + chw.shape_str());
    if (out_h < 1 || out_w < 1) throw ShapeMismatch("bilinear_resize target dims must be >= 1");
    const std::size_t C = chw.shape[0], H = chw.shape[1], W = chw.shape[2];
    Tensor out({C, out_h, out_w});
    const double sy = out_h > 1 ? static_cast<double>(H - 1) / static_cast<double>(out_h - 1) : 0.0;
    const double sx = out_w > 1 ? static_cast<double>(W - 1) / static_cast<double>(out_w - 1) : 0.0;
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < out_h; ++y) {
            double fy = sy * static_cast<double>(y);
            std::size_t y0 = static_cast<std::size_t>(fy);
            std::size_t y1 = y0 + 1 < H ? y0 + 1 : y0;
            double wy = fy - static_cast<double>(y0);
            for (std::size_t x = 0; x < out_w; ++x) {
                double fx = sx * static_cast<double>(x);
                std::size_t x0 = static_cast<std::size_t>(fx);
                std::size_t x1 = x0 + 1 < W ? x0 + 1 : x0;
                double wx = fx - static_cast<double>(x0);
                double v00 = chw.data[(c * H + y0) * W + x0];
                double v01 = chw.data[(c * H + y0) * W + x1];
                double v10 = chw.data[(c * H + y1) * W + x0];
                double v11 = chw.data[(c * H + y1) * W + x1];
                double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
                out.data[(c * out_h + y) * out_w + x] = static_cast<float>(v);
            }
        }
    return out;
}

}  // namespace splitmesh
