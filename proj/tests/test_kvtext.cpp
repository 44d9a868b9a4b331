#include "doctest.h"
#include "rln2/common.hpp"
#include "rln2/kvtext.hpp"

using namespace rln2;

TEST_CASE("kvtext serializes sorted and round-trips") {
    KvText kv;
    kv.set("zeta", "last");
    kv.set_int("alpha", -3);
    kv.set_double("mid.value", 0.1);
    auto text = kv.serialize();
    CHECK(text == "alpha=-3\nmid.value=0.10000000000000001\nzeta=last\n");

    auto back = KvText::parse(text);
    CHECK(back.get_int("alpha") == -3);
    CHECK(back.get_double("mid.value") == 0.1);
    CHECK(back.get("zeta") == "last");
}

TEST_CASE("kvtext rejects malformed keys and lines") {
    KvText kv;
    CHECK_THROWS_AS(kv.set("a=b", "x"), ValueError);
    CHECK_THROWS_AS(kv.set("k", "two\nlines"), ValueError);
    CHECK_THROWS_AS(KvText::parse("no_separator_here\n"), DataError);
    CHECK_THROWS_AS(kv.get("missing"), DataError);
    CHECK(kv.get_or("missing", "fallback") == "fallback");
}
