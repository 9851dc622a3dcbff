#include <cstdio>

int main() {
  std::printf("m3: command-line interface under construction\n");
  return 0;
}
