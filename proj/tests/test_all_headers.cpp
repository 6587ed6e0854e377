#include <gtest/gtest.h>
#include "moc/benchmark.hpp"
#include "moc/forest.hpp"
#include "moc/service.hpp"
TEST(Smoke, Builds) { SUCCEED(); }
