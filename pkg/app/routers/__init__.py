# 空文件，用于标识这是一个Python包 