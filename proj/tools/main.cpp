#include <cstdio>

int main() {
  std::puts("gcrec: subcommands not wired yet");
  return 1;
}
