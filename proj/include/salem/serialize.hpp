#pragma once
// JSON and CSV forms of the core measure types.

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "salem/measure.hpp"

namespace salem {

using Json = nlohmann::ordered_json;

void to_json(Json& j, const Interval& v);
void from_json(const Json& j, Interval& v);
void to_json(Json& j, const AtomicMeasure& v);
void from_json(const Json& j, AtomicMeasure& v);
void to_json(Json& j, const StepDensity& v);
void from_json(const Json& j, StepDensity& v);
void to_json(Json& j, const Window& v);
void from_json(const Json& j, Window& v);
void to_json(Json& j, const ProductMeasure& v);
void from_json(const Json& j, ProductMeasure& v);
void to_json(Json& j, const FourierProfile& v);
void from_json(const Json& j, FourierProfile& v);
void to_json(Json& j, const BallProfile& v);
void from_json(const Json& j, BallProfile& v);

std::string side_name(Side s);
Side parse_side(const std::string& s);

// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

// Columns (m, envelope).
void write_bands_csv(std::ostream& os, const FourierProfile& p);
// Columns (x, r, mass).
void write_balls_csv(std::ostream& os, const BallProfile& p);

}  // namespace salem
