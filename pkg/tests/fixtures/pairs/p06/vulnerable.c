int probe_host(const char *host, int count)
{
    char cmd[256];
    int status;

    if (count <= 0 || count > 10)
        count = 3;
    snprintf(cmd, sizeof(cmd), "ping -c %d %s > /dev/null 2>&1", count, host);
    status = system(cmd);
    if (status == -1)
        return -1;
    return WEXITSTATUS(status) == 0;
}
