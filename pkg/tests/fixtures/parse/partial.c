int ok(void)
{
    return 0;
}

int broken(int x
{
    return x +;
}

int after(void)
{
    return 2;
}
