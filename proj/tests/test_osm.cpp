#include <catch2/catch_amalgamated.hpp>

#include "toponav/osm.hpp"

using namespace toponav;

namespace {

const char* kTwoNodeWay = R"(<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6">
  <node id="1" lat="40.0" lon="-74.0"/>
  <node id="2" lat="40.001" lon="-74.0"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <tag k="highway" v="residential"/>
  </way>
</osm>
)";

}  // namespace

TEST_CASE("empty document yields an empty graph") {
  RoadGraph g = parse_osm("<osm/>");
  REQUIRE(g.nodes.empty());
  REQUIRE(g.edges.empty());
  RoadGraph g2 = parse_osm("<osm version=\"0.6\"></osm>");
  REQUIRE(g2.nodes.empty());
}

TEST_CASE("two-node two-way fixture") {
  RoadGraph g = parse_osm(kTwoNodeWay);
  REQUIRE(g.nodes.size() == 2);
  REQUIRE(g.edges.size() == 2);
  // Origin defaults to the first node, which therefore projects to (0,0).
  REQUIRE(g.origin == GeoPoint{40.0, -74.0});
  REQUIRE(norm(g.nodes.at(1)) == 0.0);
  REQUIRE(g.nodes.at(2).y > 100.0);
  // Both directions share the weight, the great-circle length of the way.
  double expect = great_circle_distance({40.0, -74.0}, {40.001, -74.0});
  REQUIRE(g.edges[0].from == 1);
  REQUIRE(g.edges[0].to == 2);
  REQUIRE(g.edges[1].from == 2);
  REQUIRE(g.edges[1].to == 1);
  REQUIRE(g.edges[0].weight == Catch::Approx(expect).epsilon(1e-9));
  REQUIRE(g.edges[1].weight == g.edges[0].weight);
  REQUIRE(g.edges[0].polyline.size() == 2);
  REQUIRE(g.edges[1].polyline.front() == g.edges[0].polyline.back());
}

TEST_CASE("oneway tag produces a single directed edge") {
  std::string doc = R"(<osm>
  <node id="1" lat="40.0" lon="-74.0"/>
  <node id="2" lat="40.001" lon="-74.0"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="oneway" v="yes"/></way>
</osm>)";
  RoadGraph g = parse_osm(doc);
  REQUIRE(g.edges.size() == 1);
  REQUIRE(g.edges[0].from == 1);
  REQUIRE(g.edges[0].to == 2);
}

TEST_CASE("multi-node way becomes one polyline edge per direction") {
  std::string doc = R"(<osm>
  <node id="1" lat="40.0" lon="-74.0"/>
  <node id="2" lat="40.001" lon="-74.0"/>
  <node id="3" lat="40.001" lon="-73.999"/>
  <way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/></way>
</osm>)";
  RoadGraph g = parse_osm(doc);
  REQUIRE(g.edges.size() == 2);
  REQUIRE(g.edges[0].polyline.size() == 3);
  double segsum = great_circle_distance({40.0, -74.0}, {40.001, -74.0}) +
                  great_circle_distance({40.001, -74.0}, {40.001, -73.999});
  REQUIRE(g.edges[0].weight == Catch::Approx(segsum).epsilon(1e-9));
}

TEST_CASE("dangling node reference names the id") {
  std::string doc = R"(<osm>
  <node id="1" lat="40.0" lon="-74.0"/>
  <way id="10"><nd ref="1"/><nd ref="99"/></way>
</osm>)";
  try {
    parse_osm(doc);
    FAIL("expected DanglingReferenceError");
  } catch (const DanglingReferenceError& e) {
    REQUIRE(e.node_id == 99);
    REQUIRE(std::string(e.what()).find("99") != std::string::npos);
  }
}

TEST_CASE("way with fewer than two node refs is degenerate") {
  std::string doc = R"(<osm>
  <node id="1" lat="40.0" lon="-74.0"/>
  <way id="77"><nd ref="1"/></way>
</osm>)";
  try {
    parse_osm(doc);
    FAIL("expected DegenerateWayError");
  } catch (const DegenerateWayError& e) {
    REQUIRE(e.way_id == 77);
  }
}

TEST_CASE("malformed XML reports line and column") {
  try {
    parse_osm("<osm>\n  <node id=\"1\" lat=\"0\" lon=\"0\">\n</osm>\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 3);  // the close tag that does not match <node>
    REQUIRE(e.col >= 1);
  }
  REQUIRE_THROWS_AS(parse_osm("<osm>"), ParseError);
  REQUIRE_THROWS_AS(parse_osm(""), ParseError);
  REQUIRE_THROWS_AS(parse_osm("<osm></wrong>"), ParseError);
}

TEST_CASE("bad attribute values are parse errors with position") {
  try {
    parse_osm("<osm>\n<node id=\"1\" lat=\"abc\" lon=\"0\"/>\n</osm>");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 2);
  }
  REQUIRE_THROWS_AS(parse_osm("<osm><node id=\"1\" lat=\"95\" lon=\"0\"/></osm>"),
                    ParseError);
  REQUIRE_THROWS_AS(parse_osm("<osm><node id=\"1\" lon=\"0\"/></osm>"),
                    ParseError);
}

TEST_CASE("unsupported elements and tags are ignored") {
  std::string doc = R"(<osm>
  <bounds minlat="39" minlon="-75" maxlat="41" maxlon="-73"/>
  <node id="1" lat="40.0" lon="-74.0"><tag k="amenity" v="cafe"/></node>
  <node id="2" lat="40.001" lon="-74.0"/>
  <relation id="5"><member type="way" ref="10" role=""/></relation>
  <!-- comment -->
  <way id="10"><nd ref="1"/><nd ref="2"/><tag k="name" v="A &amp; B"/></way>
</osm>)";
  RoadGraph g = parse_osm(doc);
  REQUIRE(g.nodes.size() == 2);
  REQUIRE(g.edges.size() == 2);
}

TEST_CASE("explicit origin overrides the first-node default") {
  RoadGraph g = parse_osm(kTwoNodeWay, GeoPoint{40.0005, -74.0});
  REQUIRE(g.origin == GeoPoint{40.0005, -74.0});
  REQUIRE(g.nodes.at(1).y < 0.0);
  REQUIRE(g.nodes.at(2).y > 0.0);
}
