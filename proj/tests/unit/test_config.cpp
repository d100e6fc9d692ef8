#include <doctest.h>

#include "lglbci/config.hpp"
#include "lglbci/error.hpp"

using namespace lgl;

namespace {

ErrorCode code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("accepted: " << text);
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("defaults round trip through text") {
  const TrainConfig c;
  const auto back = parse_config(to_text(c));
  CHECK(to_text(back) == to_text(c));
  CHECK(back.bands.bands.size() == 9);
}

TEST_CASE("parsing") {
  const auto c = parse_config(R"(
# comment
epochs = 7
learning_rate = 0.25   # trailing
bands = 4-8, 8-12
m = 3
heads = 2
bimap_widths = 8,6
bimap_layers = 2
selection_rule = argmax_entry
std_convention = sample
rbn_bias = true
)");
  CHECK(c.epochs == 7);
  CHECK(c.learning_rate == 0.25);
  CHECK(c.bands.bands.size() == 2);
  CHECK(c.bands.bands[1].low_hz == 8.0);
  CHECK(c.m == 3);
  CHECK(c.heads == 2);
  CHECK(c.bimap_widths == std::vector<std::size_t>{8, 6});
  CHECK(c.selection_rule == ChannelRule::ArgmaxEntry);
  CHECK(c.std_convention == StdConvention::Sample);
  CHECK(c.rbn_bias);
  CHECK(parse_config(to_text(c)).learning_rate == 0.25);
}

TEST_CASE("rejections") {
  CHECK(code_of("epoch = 3") == ErrorCode::InvalidConfig);
  CHECK(code_of("epochs = 3\nepochs = 4") == ErrorCode::InvalidConfig);
  CHECK(code_of("epochs = three") == ErrorCode::InvalidConfig);
  CHECK(code_of("epochs") == ErrorCode::InvalidConfig);
  CHECK(code_of("m = 0") == ErrorCode::InvalidConfig);
  CHECK(code_of("learning_rate = -1") == ErrorCode::InvalidConfig);
  CHECK(code_of("bimap_layers = 2\nbimap_widths = 4,6") == ErrorCode::InvalidConfig);
  CHECK(code_of("rbn_momentum = 1") == ErrorCode::InvalidConfig);
  CHECK(code_of("selection_rule = best") == ErrorCode::InvalidConfig);
  CHECK_THROWS_AS(load_config("/nonexistent.cfg"), Error);
}
