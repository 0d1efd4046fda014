#include <doctest.h>

#include <filesystem>

#include "geofactor/csv.hpp"

using namespace geofactor;

TEST_CASE("csv basic parse") {
    const auto t = parse_csv("a,b,c\n1,2,3\n4,5,6\n", "mem");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][2] == "6");
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("zzz"), ValidationError);
}

TEST_CASE("csv quoted fields and escapes") {
    const auto t = parse_csv("id,name\n1,\"Hill, North\"\n2,\"say \"\"hi\"\"\"\n", "mem");
    CHECK(t.rows[0][1] == "Hill, North");
    CHECK(t.rows[1][1] == "say \"hi\"");
}

TEST_CASE("csv tolerates CRLF and missing trailing newline") {
    const auto t = parse_csv("a,b\r\n1,2\r\n3,4", "mem");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == "3");
}

TEST_CASE("csv errors carry position") {
    CHECK_THROWS_WITH_AS(parse_csv("", "f.csv"), "f.csv: empty file", ParseError);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n", "f.csv"), ParseError);
    CHECK_THROWS_AS(parse_csv("a,b\n\"unterminated,2\n", "f.csv"), ParseError);
    try {
        parse_csv("a,b\n1,2,3\n", "f.csv");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("f.csv:2") != std::string::npos);
    }
}

TEST_CASE("csv write escapes and reparses") {
    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string path = dir + "/geofactor_csv_test.csv";
    write_csv(path, {"x", "note"}, {{"1", "plain"}, {"2", "a,b \"q\""}});
    const auto t = read_csv(path);
    CHECK(t.rows[1][1] == "a,b \"q\"");
}
