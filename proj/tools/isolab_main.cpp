#include <cstdio>

int main() {
    std::puts("isolab: CLI under construction");
    return 2;
}
