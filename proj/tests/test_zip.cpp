#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "osvtrace/zip.hpp"
#include "support/zip_writer.hpp"

using osvtrace::ParseError;
using osvtrace::ZipReader;
using testsupport::ZipWriter;

namespace {

std::filesystem::path temp_zip(const std::string& tag) {
    return std::filesystem::temp_directory_path() / ("osvtrace_zip_" + tag + ".zip");
}

} // namespace

TEST_CASE("stored entries round-trip") {
    ZipWriter writer;
    writer.add("a.json", "{\"id\":\"A\"}");
    writer.add("nested/b.json", "{\"id\":\"B\"}");
    writer.add("dir/", "");
    const auto path = temp_zip("stored");
    writer.write(path.string());

    ZipReader reader(path.string());
    REQUIRE(reader.entries().size() == 3);
    CHECK(reader.entries()[0].name == "a.json");
    CHECK(reader.entries()[0].method == 0);
    CHECK(reader.read(reader.entries()[0]) == "{\"id\":\"A\"}");
    CHECK(reader.read(reader.entries()[1]) == "{\"id\":\"B\"}");
    CHECK(reader.entries()[2].is_directory());
    std::filesystem::remove(path);
}

TEST_CASE("deflated entries round-trip") {
    std::mt19937 rng(7);
    std::string blob;
    for (int i = 0; i < 50000; ++i) blob.push_back(static_cast<char>('a' + rng() % 26));

    ZipWriter writer;
    writer.add("big.json", blob, /*deflate_entry=*/true);
    writer.add("empty.json", "", /*deflate_entry=*/true);
    const auto path = temp_zip("deflate");
    writer.write(path.string());

    ZipReader reader(path.string());
    REQUIRE(reader.entries().size() == 2);
    CHECK(reader.entries()[0].method == 8);
    CHECK(reader.entries()[0].compressed_size < blob.size());
    CHECK(reader.read(reader.entries()[0]) == blob);
    CHECK(reader.read(reader.entries()[1]).empty());
    std::filesystem::remove(path);
}

TEST_CASE("archive comment does not break end-of-directory scan") {
    ZipWriter writer;
    writer.add("x.json", "{}");
    const auto path = temp_zip("comment");
    writer.write(path.string(), std::string(1000, 'c'));

    ZipReader reader(path.string());
    REQUIRE(reader.entries().size() == 1);
    CHECK(reader.read(reader.entries()[0]) == "{}");
    std::filesystem::remove(path);
}

TEST_CASE("zip64 records are honoured") {
    ZipWriter writer(/*force_zip64=*/true);
    writer.add("one.json", "{\"id\":\"ONE\"}");
    writer.add("two.json", std::string(2048, 'z'), /*deflate_entry=*/true);
    const auto path = temp_zip("zip64");
    writer.write(path.string());

    ZipReader reader(path.string());
    REQUIRE(reader.entries().size() == 2);
    CHECK(reader.entries()[0].uncompressed_size == 12);
    CHECK(reader.read(reader.entries()[0]) == "{\"id\":\"ONE\"}");
    CHECK(reader.read(reader.entries()[1]) == std::string(2048, 'z'));
    std::filesystem::remove(path);
}

TEST_CASE("many entries") {
    ZipWriter writer;
    for (int i = 0; i < 500; ++i) {
        writer.add("e" + std::to_string(i) + ".json", "{\"n\":" + std::to_string(i) + "}");
    }
    const auto path = temp_zip("many");
    writer.write(path.string());

    ZipReader reader(path.string());
    REQUIRE(reader.entries().size() == 500);
    CHECK(reader.read(reader.entries()[499]) == "{\"n\":499}");
    std::filesystem::remove(path);
}

TEST_CASE("non-archives are rejected") {
    const auto path = temp_zip("junk");
    {
        std::ofstream out(path, std::ios::binary);
        out << "this is not a zip file";
    }
    CHECK_THROWS_AS(ZipReader(path.string()), ParseError);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(ZipReader("/nonexistent/archive.zip"), osvtrace::IoError);
}

TEST_CASE("truncated archive is rejected") {
    ZipWriter writer;
    writer.add("a.json", std::string(4096, 'q'));
    const auto path = temp_zip("trunc");
    writer.write(path.string());
    // chop the file in half: central directory now points past the end
    const auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(ZipReader(path.string()), ParseError);
    std::filesystem::remove(path);
}
