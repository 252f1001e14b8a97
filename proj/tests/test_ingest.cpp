#include <doctest.h>

#include <sstream>

#include "oracles.hpp"

using namespace kdstr;

namespace {

ErrorCode parse_error_of(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  try {
    parse_csv(in, schema);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a parse failure");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("footfall table loads with 11 sensors over 3 timesteps") {
  const auto d = oracle::footfall();
  CHECK(d.size() == 33);
  CHECK(d.num_features() == 1);
  CHECK(d.spatial_dims() == 2);
  CHECK(d.num_sensors() == 11);
  CHECK(d.num_timesteps() == 3);
  CHECK(d.feature_names() == std::vector<std::string>{"footfall"});
  // first row of the file: sensor A at the first time
  CHECK(d.value(0, 0) == 252);
  CHECK(d.times()[1] - d.times()[0] == 3600.0);
}

TEST_CASE("malformed input is rejected with a code") {
  CHECK(parse_error_of("") == ErrorCode::ParseError);
  CHECK(parse_error_of("time,x,y,v\n") == ErrorCode::ParseError);
  CHECK(parse_error_of("time,x,y,v\n0,1,1,5\n0,1,1,6\n") == ErrorCode::DuplicateInstance);
  CHECK(parse_error_of("time,x,y,v\n0,1,1,nan\n") == ErrorCode::NonFiniteValue);
  CHECK(parse_error_of("time,x,y,v\n0,1,1,inf\n") == ErrorCode::NonFiniteValue);
  CHECK(parse_error_of("time,x,y,v\n0,1,1\n") == ErrorCode::ParseError);
  CHECK(parse_error_of("time,x,y,v\n0,1,1,abc\n") == ErrorCode::ParseError);
  CHECK(parse_error_of("when,x,y,v\n0,1,1,2\n") == ErrorCode::ParseError);
}

TEST_CASE("parse errors cite the offending line") {
  std::istringstream in("time,x,y,v\n0,1,1,5\n\n1,1,1,oops\n");
  try {
    parse_csv(in, {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::istringstream dup("time,x,y,v\n0,1,1,5\n1,1,1,5\n0,1,1,6\n");
  try {
    parse_csv(dup, {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateInstance);
    CHECK(std::string(e.what()).find("lines 2 and 4") != std::string::npos);
  }
}

TEST_CASE("unreadable files are IO errors") {
  try {
    load_csv("/nonexistent/file.csv", {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

TEST_CASE("column mapping") {
  CsvSchema schema;
  schema.time_column = "t";
  schema.coord_columns = {"pos"};
  schema.feature_columns = {"b"};
  std::istringstream in("name,t,pos,a,b\nx,0,1.5,10,20\ny,0,2.5,11,21\nx,5,1.5,12,22\n");
  const auto d = parse_csv(in, schema);
  CHECK(d.spatial_dims() == 1);
  CHECK(d.num_features() == 1);
  CHECK(d.size() == 3);
  CHECK(d.value(2, 0) == 22);
  CHECK(d.times() == std::vector<double>{0, 5});
}

TEST_CASE("quoted fields and a byte-order mark") {
  std::istringstream in("\xEF\xBB\xBFtime,x,y,\"rain, mm\"\n\"0\",1,2,\"3.5\"\n");
  const auto d = parse_csv(in, {});
  CHECK(d.feature_names() == std::vector<std::string>{"rain, mm"});
  CHECK(d.value(0, 0) == 3.5);
}

TEST_CASE("ISO-8601 times") {
  CHECK(parse_time("0") == 0.0);
  CHECK(parse_time("1.5e3") == 1500.0);
  CHECK(parse_time("1970-01-02") == 86400.0);
  CHECK(parse_time("1970-01-01T01:00:00Z") == 3600.0);
  CHECK(parse_time("1970-01-01 01:00:00") == 3600.0);
  CHECK(parse_time("1970-01-01T01:00:00+01:00") == 0.0);
  CHECK(parse_time("1970-01-01T00:00:00.25Z") == 0.25);
  CHECK(parse_time("2019-06-03T09:00:00Z") == 1559552400.0);
  CHECK_THROWS_AS(parse_time("yesterday"), Error);
}

TEST_CASE("timestep boundaries") {
  CHECK(discretize_time({0, 1, 2}) == std::vector<double>{-0.5, 0.5, 1.5, 2.5});
  CHECK(discretize_time({7}) == std::vector<double>{6.5, 7.5});
  CHECK(discretize_time({0, 1, 10}) == std::vector<double>{-0.5, 0.5, 5.5, 10.5});
  CHECK(discretize_time({}).empty());
}

TEST_CASE("CSV writer output reads back to the same dataset") {
  SyntheticParams p;
  p.sensors = 7;
  p.timesteps = 5;
  p.features = 2;
  p.noise = 0.3;
  const auto d = gen_synthetic(Archetype::Continuous, p, 3);
  std::stringstream buf;
  write_csv(buf, d);
  CsvSchema schema;
  schema.ignore_columns = {"sensor"};
  const auto back = parse_csv(buf, schema);
  CHECK(back.keys() == d.keys());
  CHECK(back.raw_values() == d.raw_values());
  CHECK(back.sensor_coords() == d.sensor_coords());
  CHECK(back.times() == d.times());
}
