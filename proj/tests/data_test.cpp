#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <unistd.h>
#include <vector>

#include "splitmesh/dataset.hpp"
#include "splitmesh/errors.hpp"
#include "splitmesh/loaders.hpp"
#include "testutil.hpp"

using namespace splitmesh;
namespace fs = std::filesystem;

namespace {

// scratch dir per test file; removed at the end of each test case that uses it
struct scratch_dir {
    fs::path path;
    scratch_dir() {
        path = fs::temp_directory_path() / ("splitmesh_data_test_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~scratch_dir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& body) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("parse_ratio accepts colon separated positive integers") {
    auto r = parse_ratio("8:1:1");
    CHECK(r.parts == std::vector<std::uint64_t>{8, 1, 1});
    CHECK(parse_ratio("1").parts == std::vector<std::uint64_t>{1});
    CHECK(parse_ratio("4:3:2:1").parts == std::vector<std::uint64_t>{4, 3, 2, 1});
    auto w = parse_ratio("7:2:1").weights();
    CHECK(w[0] == doctest::Approx(0.7));
    CHECK(w[1] == doctest::Approx(0.2));
    CHECK(w[2] == doctest::Approx(0.1));
}

TEST_CASE("parse_ratio rejects malformed text") {
    CHECK_THROWS_AS(parse_ratio(""), ParseError);
    CHECK_THROWS_AS(parse_ratio("0:1"), ParseError);
    CHECK_THROWS_AS(parse_ratio("1:0"), ParseError);
    CHECK_THROWS_AS(parse_ratio("1:x"), ParseError);
    CHECK_THROWS_AS(parse_ratio("1:"), ParseError);
    CHECK_THROWS_AS(parse_ratio(":1"), ParseError);
    CHECK_THROWS_AS(parse_ratio("-1:2"), ParseError);
    CHECK_THROWS_AS(parse_ratio("1::2"), ParseError);
    CHECK_THROWS_AS(parse_ratio("3.5:1"), ParseError);
    CHECK_THROWS_AS(parse_ratio("1234567890123:1"), ParseError);
}

TEST_CASE("ratio round trips through its string form") {
    for (const char* text : {"1", "8:1:1", "7:2:1", "4:3:2:1", "6:1:1:1:1"}) {
        CHECK(ratio_to_string(parse_ratio(text)) == text);
    }
}

TEST_CASE("largest remainder apportionment known answers") {
    using v64 = std::vector<std::uint64_t>;
    CHECK(apportion_largest_remainder(10, {8, 1, 1}) == v64{8, 1, 1});
    CHECK(apportion_largest_remainder(12, {7, 2, 1}) == v64{9, 2, 1});
    CHECK(apportion_largest_remainder(10, {4, 3, 2, 1}) == v64{4, 3, 2, 1});
    CHECK(apportion_largest_remainder(64, {64, 64, 64}) == v64{22, 21, 21});
    CHECK(apportion_largest_remainder(64, {8, 1, 1}) == v64{51, 7, 6});
    CHECK(apportion_largest_remainder(7, {2, 3, 5}) == v64{1, 2, 4});
    // remainder ties go to the lower index
    CHECK(apportion_largest_remainder(1, {1, 1}) == v64{1, 0});
    CHECK(apportion_largest_remainder(3, {1, 1}) == v64{2, 1});
}

TEST_CASE("apportionment always sums to the total and stays within one of exact") {
    std::vector<std::pair<std::uint64_t, std::vector<std::uint64_t>>> cases = {
        {101, {5, 3, 2}}, {37, {1, 1}}, {1000, {9, 1}}, {1, {7}}, {64, {52, 52, 52}},
        {19, {6, 1, 1, 1}}, {97, {13, 7, 3, 1, 1}}};
    for (const auto& [total, parts] : cases) {
        auto got = apportion_largest_remainder(total, parts);
        REQUIRE(got.size() == parts.size());
        std::uint64_t sum = std::accumulate(got.begin(), got.end(), std::uint64_t{0});
        CHECK(sum == total);
        double denom = static_cast<double>(std::accumulate(parts.begin(), parts.end(), std::uint64_t{0}));
        for (std::size_t i = 0; i < parts.size(); ++i) {
            double exact = static_cast<double>(total) * static_cast<double>(parts[i]) / denom;
            CHECK(std::abs(static_cast<double>(got[i]) - exact) < 1.0);
        }
    }
}

TEST_CASE("partition hands out contiguous runs of the seeded permutation") {
    auto p = partition(12, parse_ratio("7:2:1"), 0);
    REQUIRE(p.shards.size() == 3);
    CHECK(p.shards[0] == std::vector<std::uint64_t>{4, 1, 6, 8, 0, 5, 2, 3, 11});
    CHECK(p.shards[1] == std::vector<std::uint64_t>{9, 10});
    CHECK(p.shards[2] == std::vector<std::uint64_t>{7});
}

TEST_CASE("partition shards are disjoint, cover the corpus and match the ratio") {
    struct { std::uint64_t n; const char* ratio; std::uint64_t seed; } cases[] = {
        {101, "5:3:2", 9}, {37, "1:1", 0}, {1000, "9:1", 3}, {64, "8:1:1", 42}, {11, "1:1:1:1:1", 5}};
    for (const auto& tc : cases) {
        auto ratio = parse_ratio(tc.ratio);
        auto p = partition(tc.n, ratio, tc.seed);
        std::vector<std::uint64_t> all;
        auto w = ratio.weights();
        for (std::size_t c = 0; c < p.shards.size(); ++c) {
            double exact = static_cast<double>(tc.n) * w[c];
            CHECK(std::abs(static_cast<double>(p.shards[c].size()) - exact) < 1.0);
            all.insert(all.end(), p.shards[c].begin(), p.shards[c].end());
        }
        std::sort(all.begin(), all.end());
        std::vector<std::uint64_t> iota(tc.n);
        std::iota(iota.begin(), iota.end(), 0);
        CHECK(all == iota);  // disjoint + covering in one comparison
    }
}

TEST_CASE("partition is seed deterministic") {
    auto a = partition(50, parse_ratio("3:2"), 77);
    auto b = partition(50, parse_ratio("3:2"), 77);
    auto c = partition(50, parse_ratio("3:2"), 78);
    CHECK(a.shards == b.shards);
    CHECK(a.shards != c.shards);
}

TEST_CASE("partition refuses fewer samples than clients") {
    CHECK_THROWS_AS(partition(2, parse_ratio("1:1:1"), 0), TooFewSamples);
    CHECK_NOTHROW(partition(3, parse_ratio("1:1:1"), 0));
}

TEST_CASE("batch allocation known answers") {
    using vs = std::vector<std::size_t>;
    CHECK(batch_allocation(64, {64, 64, 64}) == vs{22, 21, 21});
    // a tiny shard still contributes one row per round
    CHECK(batch_allocation(8, {100, 1, 1}) == vs{6, 1, 1});
    // exhausted shards stay at zero and do not participate
    CHECK(batch_allocation(8, {0, 100, 1}) == vs{0, 7, 1});
    CHECK(batch_allocation(3, {5, 5, 5}) == vs{1, 1, 1});
}

TEST_CASE("batch allocation rejects impossible batch sizes") {
    CHECK_THROWS_AS(batch_allocation(2, {5, 5, 5}), BatchTooSmall);
    CHECK_THROWS_AS(batch_allocation(11, {5, 5}), BatchTooSmall);
    CHECK_THROWS_AS(batch_allocation(4, {0, 0}), BatchTooSmall);
}

TEST_CASE("batch allocation covers the batch and feeds every active shard") {
    struct { std::size_t B; std::vector<std::size_t> sizes; } cases[] = {
        {64, {52, 52, 52}}, {16, {1000, 3, 2}}, {5, {1, 1, 1, 1, 1}}, {12, {0, 9, 0, 7}}, {7, {20, 1}}};
    for (const auto& tc : cases) {
        auto got = batch_allocation(tc.B, tc.sizes);
        REQUIRE(got.size() == tc.sizes.size());
        std::size_t sum = 0;
        for (std::size_t i = 0; i < got.size(); ++i) {
            sum += got[i];
            if (tc.sizes[i] == 0) CHECK(got[i] == 0);
            else CHECK(got[i] >= 1);
            CHECK(got[i] <= tc.sizes[i]);
        }
        CHECK(sum == tc.B);
    }
}

TEST_CASE("eval split known answer keeps one fifth for validation") {
    std::vector<std::uint64_t> rows(10);
    std::iota(rows.begin(), rows.end(), 10);
    auto s = eval_split(rows, 7);
    CHECK(s.val == std::vector<std::uint64_t>{11, 18});
    CHECK(s.train == std::vector<std::uint64_t>{10, 12, 13, 14, 15, 16, 17, 19});
}

TEST_CASE("eval split preserves shard order and partitions exactly") {
    std::vector<std::uint64_t> rows{5, 9, 2, 14, 7, 11, 3, 20, 17, 8, 4, 13};
    auto s = eval_split(rows, 3);
    CHECK(s.val.size() == rows.size() / 5);
    CHECK(s.train.size() + s.val.size() == rows.size());

    // both sides must be subsequences of the original shard order
    auto is_subsequence = [&](const std::vector<std::uint64_t>& sub) {
        std::size_t j = 0;
        for (std::size_t i = 0; i < rows.size() && j < sub.size(); ++i)
            if (rows[i] == sub[j]) ++j;
        return j == sub.size();
    };
    CHECK(is_subsequence(s.train));
    CHECK(is_subsequence(s.val));

    auto merged = s.train;
    merged.insert(merged.end(), s.val.begin(), s.val.end());
    std::sort(merged.begin(), merged.end());
    auto sorted_rows = rows;
    std::sort(sorted_rows.begin(), sorted_rows.end());
    CHECK(merged == sorted_rows);
}

TEST_CASE("eval split yields no validation rows below five samples") {
    std::vector<std::uint64_t> rows{1, 2, 3, 4};
    auto s = eval_split(rows, 0);
    CHECK(s.val.empty());
    CHECK(s.train == rows);
}

TEST_CASE("eval split is seed deterministic") {
    std::vector<std::uint64_t> rows(40);
    std::iota(rows.begin(), rows.end(), 0);
    auto a = eval_split(rows, 6);
    auto b = eval_split(rows, 6);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    auto c = eval_split(rows, 8);
    CHECK(a.val != c.val);
}

TEST_CASE("synthetic classification alternates labels and shifts feature means") {
    auto d = synth(TaskKind::Classification, 4, {2}, 3);
    REQUIRE(d.features.shape == std::vector<std::size_t>{4, 2});
    REQUIRE(d.labels.shape == std::vector<std::size_t>{4});
    CHECK(d.labels.data == std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});
    CHECK(d.task == TaskKind::Classification);
    // gaussian draws plus the class shift, pinned against an out of band reimplementation
    CHECK(d.features.data[0] == doctest::Approx(-1.1410515308380127).epsilon(1e-6));
    CHECK(d.features.data[1] == doctest::Approx(0.38748088479042053).epsilon(1e-6));
    CHECK(d.features.data[2] == doctest::Approx(-0.6468790173530579).epsilon(1e-6));
    CHECK(d.features.data[3] == doctest::Approx(2.031247138977051).epsilon(1e-6));
}

TEST_CASE("synthetic regression with zero noise is exactly linear") {
    auto d = synth(TaskKind::Regression, 2, {3}, 5, 0.0);
    REQUIRE(d.features.shape == std::vector<std::size_t>{2, 3});
    CHECK(d.task == TaskKind::Regression);
    CHECK(d.features.data[0] == doctest::Approx(0.01997910626232624).epsilon(1e-6));
    CHECK(d.features.data[1] == doctest::Approx(1.3856395483016968).epsilon(1e-6));
    CHECK(d.features.data[2] == doctest::Approx(-1.3376260995864868).epsilon(1e-6));
    CHECK(d.labels.data[0] == doctest::Approx(6.637889862060547).epsilon(1e-6));
    CHECK(d.labels.data[1] == doctest::Approx(6.872347354888916).epsilon(1e-6));

    // target = 10 + 1.5 x0 - x1 + 1.5 x2 recomputed from the emitted features
    for (std::size_t i = 0; i < 2; ++i) {
        double t = 10.0;
        for (std::size_t j = 0; j < 3; ++j)
            t += (j % 2 == 0 ? 1.5 : -1.0) * static_cast<double>(d.features.data[i * 3 + j]);
        CHECK(d.labels.data[i] == doctest::Approx(t).epsilon(1e-5));
    }
}

TEST_CASE("synthetic data is bitwise deterministic per seed") {
    auto a = synth(TaskKind::Classification, 16, {1, 4, 4}, 11);
    auto b = synth(TaskKind::Classification, 16, {1, 4, 4}, 11);
    CHECK(a.features.data == b.features.data);
    CHECK(a.labels.data == b.labels.data);
    auto c = synth(TaskKind::Classification, 16, {1, 4, 4}, 12);
    CHECK(a.features.data != c.features.data);
}

TEST_CASE("synthetic corpus needs at least two samples") {
    CHECK_THROWS_AS(synth(TaskKind::Classification, 1, {2}, 0), TooFewSamples);
    CHECK_THROWS_AS(synth(TaskKind::Regression, 0, {2}, 0), TooFewSamples);
}

TEST_CASE("zscore fit computes per feature population statistics") {
    Dataset d;
    d.features = testutil::make_tensor({3, 2}, {1, 2, 3, 4, 100, 200});
    d.labels = testutil::make_tensor({3}, {0, 1, 0});
    auto st = zscore_fit(d, {0, 1});
    REQUIRE(st.mean.size() == 2);
    CHECK(st.mean[0] == doctest::Approx(2.0));
    CHECK(st.mean[1] == doctest::Approx(3.0));
    CHECK(st.stddev[0] == doctest::Approx(1.0));
    CHECK(st.stddev[1] == doctest::Approx(1.0));

    // row 2 was excluded from the fit, so it lands far outside the unit range
    zscore_apply(d, st);
    CHECK(d.features.data[0] == doctest::Approx(-1.0));
    CHECK(d.features.data[1] == doctest::Approx(-1.0));
    CHECK(d.features.data[2] == doctest::Approx(1.0));
    CHECK(d.features.data[3] == doctest::Approx(1.0));
    CHECK(d.features.data[4] == doctest::Approx(98.0));
    CHECK(d.features.data[5] == doctest::Approx(197.0));
}

TEST_CASE("zscore floors constant columns instead of dividing by zero") {
    Dataset d;
    d.features = testutil::make_tensor({2, 2}, {5, 1, 5, 3});
    d.labels = testutil::make_tensor({2}, {0, 1});
    auto st = zscore_fit(d, {0, 1});
    CHECK(st.stddev[0] == doctest::Approx(1e-8));
    zscore_apply(d, st);
    CHECK(d.features.data[0] == 0.0f);  // (5 - 5) / 1e-8
    CHECK(d.features.data[2] == 0.0f);
    CHECK(d.features.data[1] == doctest::Approx(-1.0));
}

TEST_CASE("zscore rejects empty fits and mismatched widths") {
    Dataset d;
    d.features = testutil::make_tensor({2, 2}, {1, 2, 3, 4});
    d.labels = testutil::make_tensor({2}, {0, 1});
    CHECK_THROWS_AS(zscore_fit(d, {}), NoUsableRows);
    ZScoreStats st;
    st.mean = {0.0};
    st.stddev = {1.0};
    CHECK_THROWS_AS(zscore_apply(d, st), ShapeMismatch);
}

TEST_CASE("gather keeps the requested row order") {
    Tensor t = testutil::make_tensor({3, 2}, {0, 1, 10, 11, 20, 21});
    auto g = gather_rows(t, {2, 0});
    CHECK(g.shape == std::vector<std::size_t>{2, 2});
    CHECK(g.data == std::vector<float>{20, 21, 0, 1});

    Dataset d;
    d.features = t;
    d.labels = testutil::make_tensor({3}, {7, 8, 9});
    d.task = TaskKind::Regression;
    auto gd = gather_dataset(d, {1});
    CHECK(gd.task == TaskKind::Regression);
    CHECK(gd.features.data == std::vector<float>{10, 11});
    CHECK(gd.labels.data == std::vector<float>{8});
}

TEST_CASE("tensor files round trip bitwise with a fixed header layout") {
    scratch_dir dir;
    auto path = dir.file("t.nt");
    Tensor t = testutil::make_tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    write_nt(path, t);

    auto bytes = read_bytes(path);
    REQUIRE(bytes.size() == 4 + 1 + 1 + 2 * 4 + 6 * 4);
    CHECK(bytes[0] == 'N');
    CHECK(bytes[1] == 'T');
    CHECK(bytes[2] == 'S');
    CHECK(bytes[3] == 'R');
    CHECK(bytes[4] == 0x01);  // version
    CHECK(bytes[5] == 0x02);  // rank
    CHECK(bytes[6] == 0x02);  // dims, little endian u32
    CHECK(bytes[7] == 0x00);
    CHECK(bytes[10] == 0x03);
    // first element 1.0f on the wire
    CHECK(bytes[14] == 0x00);
    CHECK(bytes[15] == 0x00);
    CHECK(bytes[16] == 0x80);
    CHECK(bytes[17] == 0x3F);

    auto back = read_nt(path);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
}

TEST_CASE("tensor file reader rejects damage") {
    scratch_dir dir;
    auto path = dir.file("t.nt");
    Tensor t = testutil::make_tensor({4}, {1, 2, 3, 4});
    write_nt(path, t);
    auto good = read_bytes(path);

    SUBCASE("bad magic") {
        auto bad = good;
        bad[0] = 'X';
        write_bytes(path, bad);
        CHECK_THROWS_AS(read_nt(path), ParseError);
    }
    SUBCASE("bad version") {
        auto bad = good;
        bad[4] = 9;
        write_bytes(path, bad);
        CHECK_THROWS_AS(read_nt(path), ParseError);
    }
    SUBCASE("truncated payload") {
        auto bad = good;
        bad.pop_back();
        write_bytes(path, bad);
        CHECK_THROWS_AS(read_nt(path), ParseError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_nt(dir.file("absent.nt")), IoError);
    }
}

TEST_CASE("csv loader parses quoted fields and drops malformed rows") {
    scratch_dir dir;
    auto path = dir.file("d.csv");
    write_text(path,
               "age,\"se,x\",ldl,notes\n"
               "1,2,3,ok\n"
               "\"4\",\"5\",6,\"says \"\"hi\"\"\"\n"
               "7,8,oops,x\n"
               "9,10\n"
               "\n"
               "11,12,13,tail\n");
    auto d = load_csv(path, {"age", "se,x"}, "ldl");
    CHECK(d.task == TaskKind::Regression);
    CHECK(d.size() == 3);
    CHECK(d.dropped_rows == 2);
    CHECK(d.features.shape == std::vector<std::size_t>{3, 2});
    CHECK(d.features.data == std::vector<float>{1, 2, 4, 5, 11, 12});
    CHECK(d.labels.data == std::vector<float>{3, 6, 13});
}

TEST_CASE("csv loader reports unusable inputs") {
    scratch_dir dir;
    SUBCASE("unknown column") {
        auto path = dir.file("d.csv");
        write_text(path, "a,b\n1,2\n");
        CHECK_THROWS_AS(load_csv(path, {"a"}, "nope"), UnknownColumn);
    }
    SUBCASE("no parseable rows") {
        auto path = dir.file("d.csv");
        write_text(path, "a,b\nx,y\nq,w\n");
        CHECK_THROWS_AS(load_csv(path, {"a"}, "b"), NoUsableRows);
    }
    SUBCASE("header only") {
        auto path = dir.file("d.csv");
        write_text(path, "a,b\n");
        CHECK_THROWS_AS(load_csv(path, {"a"}, "b"), NoUsableRows);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_csv(dir.file("absent.csv"), {"a"}, "b"), IoError);
    }
}

TEST_CASE("tensor directory loader stacks positives then negatives") {
    scratch_dir dir;
    fs::create_directories(dir.path / "pos");
    fs::create_directories(dir.path / "neg");
    write_nt((dir.path / "pos" / "b.nt").string(), testutil::make_tensor({1, 2}, {3, 4}));
    write_nt((dir.path / "pos" / "a.nt").string(), testutil::make_tensor({1, 2}, {1, 2}));
    write_nt((dir.path / "neg" / "c.nt").string(), testutil::make_tensor({1, 2}, {5, 6}));

    auto d = load_tensor_dir(dir.path.string());
    CHECK(d.task == TaskKind::Classification);
    REQUIRE(d.size() == 3);
    CHECK(d.features.shape == std::vector<std::size_t>{3, 1, 2});
    // filename sorted within a class: a before b
    CHECK(d.features.data == std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(d.labels.data == std::vector<float>{1, 1, 0});
}

TEST_CASE("tensor directory loader rejects shape drift and empty corpora") {
    scratch_dir dir;
    SUBCASE("mixed shapes") {
        fs::create_directories(dir.path / "pos");
        fs::create_directories(dir.path / "neg");
        write_nt((dir.path / "pos" / "a.nt").string(), testutil::make_tensor({1, 2}, {1, 2}));
        write_nt((dir.path / "neg" / "b.nt").string(), testutil::make_tensor({2, 1}, {1, 2}));
        CHECK_THROWS_AS(load_tensor_dir(dir.path.string()), ShapeMismatch);
    }
    SUBCASE("empty directory") {
        fs::create_directories(dir.path / "pos");
        fs::create_directories(dir.path / "neg");
        CHECK_THROWS_AS(load_tensor_dir(dir.path.string()), NoUsableRows);
    }
}

TEST_CASE("pgm loader scales by maxval and skips comments") {
    scratch_dir dir;
    auto path = dir.file("img.pgm");
    std::vector<std::uint8_t> body;
    std::string header = "P5\n# camera dump\n3 2\n200\n";
    body.insert(body.end(), header.begin(), header.end());
    for (std::uint8_t v : {0, 50, 100, 150, 200, 25}) body.push_back(v);
    write_bytes(path, body);

    auto t = load_pgm(path);
    CHECK(t.shape == std::vector<std::size_t>{1, 2, 3});
    CHECK(t.data[0] == doctest::Approx(0.0));
    CHECK(t.data[1] == doctest::Approx(0.25));
    CHECK(t.data[4] == doctest::Approx(1.0));
    CHECK(t.data[5] == doctest::Approx(0.125));
}

TEST_CASE("pgm loader rejects other formats and truncated pixels") {
    scratch_dir dir;
    SUBCASE("ascii pgm") {
        auto path = dir.file("img.pgm");
        write_text(path, "P2\n2 2\n255\n0 1 2 3\n");
        CHECK_THROWS_AS(load_pgm(path), ParseError);
    }
    SUBCASE("short pixel data") {
        auto path = dir.file("img.pgm");
        std::string header = "P5\n2 2\n255\n";
        std::vector<std::uint8_t> body(header.begin(), header.end());
        body.push_back(7);  // 1 of 4 pixels
        write_bytes(path, body);
        CHECK_THROWS_AS(load_pgm(path), ParseError);
    }
    SUBCASE("sixteen bit maxval") {
        auto path = dir.file("img.pgm");
        write_text(path, "P5\n1 1\n65535\n..");
        CHECK_THROWS_AS(load_pgm(path), ParseError);
    }
}

TEST_CASE("bilinear resize interpolates with corner alignment") {
    Tensor t = testutil::make_tensor({1, 2, 2}, {0, 2, 4, 6});
    auto r = bilinear_resize(t, 3, 3);
    CHECK(r.shape == std::vector<std::size_t>{1, 3, 3});
    CHECK(r.data == std::vector<float>{0, 1, 2, 2, 3, 4, 4, 5, 6});

    // upscale of a single pixel is constant
    Tensor one = testutil::make_tensor({1, 1, 1}, {7});
    auto up = bilinear_resize(one, 2, 2);
    CHECK(up.data == std::vector<float>{7, 7, 7, 7});
}

TEST_CASE("bilinear resize treats channels independently") {
    Tensor t = testutil::make_tensor({2, 2, 2}, {0, 2, 4, 6, 10, 12, 14, 16});
    auto r = bilinear_resize(t, 3, 3);
    REQUIRE(r.shape == std::vector<std::size_t>{2, 3, 3});
    CHECK(r.data[4] == 3.0f);   // channel 0 centre
    CHECK(r.data[13] == 13.0f); // channel 1 centre
    CHECK(bilinear_resize(t, 2, 2).data == t.data);  // identity when sizes match
}

TEST_CASE("bilinear resize wants a channel-height-width tensor") {
    Tensor flat = testutil::make_tensor({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(bilinear_resize(flat, 2, 2), ShapeMismatch);
}
