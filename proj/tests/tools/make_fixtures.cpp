// Writes the synthetic three-card fixture set: two stereo cards and one
// card whose halves are unrelated.
#include <cstdlib>
#include <iostream>
#include <string>

#include "synthetic.hpp"

int main(int argc, char** argv) {
  if (argc < 2 || argc > 4) {
    std::cerr << "usage: make_fixtures <dir> [width height]\n";
    return 2;
  }
  const int w = argc > 2 ? std::atoi(argv[2]) : 320;
  const int h = argc > 3 ? std::atoi(argv[3]) : 240;
  parallax::testing::write_fixture_set(argv[1], w, h);
  return 0;
}
