#include "alpha.h"

static int square(int x)
{
    return x * x;
}

int sum_of_squares(const int *v, int n)
{
    int total = 0;
    for (int i = 0; i < n; i++)
        total += square(v[i]);
    return total;
}
